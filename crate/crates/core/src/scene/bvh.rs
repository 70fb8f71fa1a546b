//! Bounding-volume hierarchy over entity boxes.

use super::mesh::Aabb;

const LEAF_SIZE: usize = 2;

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, items: Vec<usize> },
    Inner { bounds: Aabb, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Immutable hierarchy answering "which boxes contain this point".
///
/// Items are referred to by their index in the slice given to [`Bvh::build`].
/// Splits are median splits on the widest centroid axis with ties broken by
/// index, so the tree shape depends only on the input order, which callers
/// fix by sorting.
#[derive(Debug, Clone)]
pub struct Bvh {
    root: Option<Node>,
    boxes: Vec<Aabb>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Bvh {
        let items: Vec<usize> = (0..boxes.len()).collect();
        let root = (!items.is_empty()).then(|| build_node(boxes, items));
        Bvh { root, boxes: boxes.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Indices of every box containing `p`, ascending.
    pub fn query(&self, p: [f64; 3]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<&Node> = self.root.iter().collect();
        while let Some(node) = stack.pop() {
            if !node.bounds().contains(p) {
                continue;
            }
            match node {
                Node::Leaf { items, .. } => {
                    out.extend(items.iter().copied().filter(|&i| self.boxes[i].contains(p)))
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn build_node(boxes: &[Aabb], mut items: Vec<usize>) -> Node {
    let bounds = items.iter().fold(Aabb::EMPTY, |acc, &i| acc.union(&boxes[i]));
    if items.len() <= LEAF_SIZE {
        return Node::Leaf { bounds, items };
    }
    let centers = items.iter().fold(Aabb::EMPTY, |acc, &i| acc.grown(boxes[i].center()));
    let axis = (0..3)
        .max_by(|&a, &b| {
            let ea = centers.max[a] - centers.min[a];
            let eb = centers.max[b] - centers.min[b];
            ea.total_cmp(&eb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    items.sort_by(|&a, &b| boxes[a].center()[axis].total_cmp(&boxes[b].center()[axis]).then(a.cmp(&b)));
    let right = items.split_off(items.len() / 2);
    Node::Inner {
        bounds,
        left: Box::new(build_node(boxes, items)),
        right: Box::new(build_node(boxes, right)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(x: f64) -> Aabb {
        Aabb { min: [x, 0.0, 0.0], max: [x + 1.0, 1.0, 1.0] }
    }

    #[test]
    fn finds_every_containing_box() {
        let mut boxes: Vec<Aabb> = (0..20).map(|i| unit_box(i as f64 * 0.5)).collect();
        boxes.push(Aabb { min: [-100.0; 3], max: [100.0; 3] });
        let bvh = Bvh::build(&boxes);
        for probe in [-1.0, 0.25, 3.3, 7.0, 10.2, 50.0] {
            let p = [probe, 0.5, 0.5];
            let brute: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].contains(p)).collect();
            assert_eq!(bvh.query(p), brute, "probe {probe}");
        }
    }

    #[test]
    fn empty_tree_answers_nothing() {
        let bvh = Bvh::build(&[]);
        assert!(bvh.is_empty());
        assert!(bvh.query([0.0; 3]).is_empty());
    }
}
