//! Joint/limb topology.
//!
//! A [`Skeleton`] is a directed tree over `K` named joints with `K - 1` limbs,
//! each limb a `(parent, child)` joint-index pair. Limb `c` owns affinity
//! field `c`; joint `j` owns confidence map `j`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COCO17_JSON: &str = include_str!("../data/skeletons/v1/coco17.json");
const MPII16_JSON: &str = include_str!("../data/skeletons/v1/mpii16.json");

/// Names of the presets shipped with the crate.
pub const PRESETS: [&str; 2] = ["coco17", "mpii16"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSkeleton", deny_unknown_fields)]
pub struct Skeleton {
    name: String,
    joints: Vec<String>,
    limbs: Vec<[usize; 2]>,
    root: usize,
    oks_kappa: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSkeleton {
    name: String,
    joints: Vec<String>,
    limbs: Vec<[usize; 2]>,
    root: usize,
    oks_kappa: Vec<f64>,
}

impl TryFrom<RawSkeleton> for Skeleton {
    type Error = Error;

    fn try_from(raw: RawSkeleton) -> Result<Self> {
        Skeleton::new(raw.name, raw.joints, raw.limbs, raw.root, raw.oks_kappa)
    }
}

impl Skeleton {
    /// Builds a skeleton, checking that the limbs form a tree rooted at `root`.
    pub fn new(
        name: impl Into<String>,
        joints: Vec<String>,
        limbs: Vec<[usize; 2]>,
        root: usize,
        oks_kappa: Vec<f64>,
    ) -> Result<Self> {
        let k = joints.len();
        let invalid = |msg: String| Err(Error::InvalidSkeleton(msg));
        if k == 0 {
            return invalid("no joints".into());
        }
        if root >= k {
            return invalid(format!("root {root} out of range for {k} joints"));
        }
        if limbs.len() != k - 1 {
            return invalid(format!("{} limbs for {k} joints, expected {}", limbs.len(), k - 1));
        }
        if oks_kappa.len() != k {
            return invalid(format!("{} OKS constants for {k} joints", oks_kappa.len()));
        }
        if let Some(j) = oks_kappa.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return invalid(format!("oks_kappa[{j}] must be positive"));
        }
        let mut parent = vec![None; k];
        for (c, &[p, ch]) in limbs.iter().enumerate() {
            if p >= k || ch >= k {
                return invalid(format!("limb {c} references joint out of range"));
            }
            if p == ch {
                return invalid(format!("limb {c} is a self-loop"));
            }
            if ch == root {
                return invalid(format!("limb {c} points into the root"));
            }
            if parent[ch].replace(p).is_some() {
                return invalid(format!("joint {ch} has more than one parent"));
            }
        }
        let skeleton = Skeleton { name: name.into(), joints, limbs, root, oks_kappa };
        // K-1 edges with unique parents: connected iff every joint is reachable.
        let reached = skeleton.bfs_order().len();
        if reached != k {
            return invalid(format!("only {reached} of {k} joints reachable from root"));
        }
        Ok(skeleton)
    }

    /// Loads one of the bundled presets (`"coco17"`, `"mpii16"`).
    pub fn preset(name: &str) -> Result<Self> {
        let json = match name {
            "coco17" => COCO17_JSON,
            "mpii16" => MPII16_JSON,
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Ok(serde_json::from_str(json).expect("bundled skeleton data is valid"))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::InvalidSkeleton(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn limbs(&self) -> &[[usize; 2]] {
        &self.limbs
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn oks_kappa(&self) -> &[f64] {
        &self.oks_kappa
    }

    /// Number of joints `K`.
    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    /// Number of limbs `C`.
    pub fn num_limbs(&self) -> usize {
        self.limbs.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j == name)
    }

    /// Limbs touching joint `j`, in declaration order.
    pub fn incident_limbs(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.limbs.iter().enumerate().filter(move |(_, &[p, c])| p == j || c == j).map(|(i, _)| i)
    }

    /// Head segment used for PCKh normalisation, if the skeleton has one.
    pub fn head_segment(&self) -> Option<(usize, usize)> {
        Some((self.joint_index("head_top")?, self.joint_index("upper_neck")?))
    }

    /// Breadth-first joint order from the root.
    ///
    /// Joints of equal depth are ordered by the position of their incoming
    /// limb in the limb list.
    pub fn bfs_order(&self) -> Vec<usize> {
        let k = self.joints.len();
        let mut seen = vec![false; k];
        let mut order = Vec::with_capacity(k);
        let mut level = vec![self.root];
        seen[self.root] = true;
        while !level.is_empty() {
            order.extend_from_slice(&level);
            let mut next = Vec::new();
            // Scanning limbs in declaration order yields the tie-break directly.
            for &[p, c] in &self.limbs {
                if level.contains(&p) && !seen[c] {
                    seen[c] = true;
                    next.push(c);
                }
            }
            level = next;
        }
        order
    }

    /// Depth of every joint below the root.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.joints.len()];
        depth[self.root] = 0;
        let mut queue = VecDeque::from([self.root]);
        while let Some(j) = queue.pop_front() {
            for &[p, c] in &self.limbs {
                if p == j && depth[c] == usize::MAX {
                    depth[c] = depth[j] + 1;
                    queue.push_back(c);
                }
            }
        }
        depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(limbs: Vec<[usize; 2]>, root: usize, k: usize) -> Result<Skeleton> {
        let joints = (0..k).map(|i| format!("j{i}")).collect();
        Skeleton::new("toy", joints, limbs, root, vec![0.1; k])
    }

    #[test]
    fn preset_sizes() {
        let coco = Skeleton::preset("coco17").unwrap();
        assert_eq!((coco.num_joints(), coco.num_limbs()), (17, 16));
        assert_eq!(coco.joints()[coco.root()], "nose");
        let mpii = Skeleton::preset("mpii16").unwrap();
        assert_eq!((mpii.num_joints(), mpii.num_limbs()), (16, 15));
        assert_eq!(mpii.joints()[mpii.root()], "thorax");
        assert_eq!(Skeleton::preset("coco17").unwrap(), coco);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Skeleton::preset("coco18"), Err(Error::UnknownPreset(n)) if n == "coco18"));
    }

    #[test]
    fn chain_and_star_orders() {
        assert_eq!(toy(vec![[0, 1], [1, 2]], 0, 3).unwrap().bfs_order(), vec![0, 1, 2]);
        assert_eq!(toy(vec![[0, 1], [0, 2], [0, 3]], 0, 4).unwrap().bfs_order(), vec![0, 1, 2, 3]);
        // Non-zero root, children declared out of index order.
        assert_eq!(toy(vec![[2, 1], [2, 0]], 2, 3).unwrap().bfs_order(), vec![2, 1, 0]);
    }

    #[test]
    fn equal_depth_follows_limb_order() {
        // root 0 -> {1, 2}; 2 -> 3 declared before 1 -> 4.
        let s = toy(vec![[0, 1], [0, 2], [2, 3], [1, 4]], 0, 5).unwrap();
        assert_eq!(s.bfs_order(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_non_trees() {
        assert!(toy(vec![[0, 1], [1, 0]], 0, 2).is_err());
        assert!(toy(vec![[0, 1], [2, 1]], 0, 3).is_err(), "two parents");
        assert!(toy(vec![[1, 2], [2, 1]], 0, 3).is_err(), "cycle off the root");
        assert!(toy(vec![[0, 5]], 0, 2).is_err());
        assert!(toy(vec![[0, 1]], 0, 3).is_err(), "too few limbs");
        let joints = vec!["a".to_string(), "b".to_string()];
        assert!(Skeleton::new("bad", joints, vec![[0, 1]], 0, vec![0.1, 0.0]).is_err());
    }

    #[test]
    fn presets_parent_precedes_child() {
        for name in PRESETS {
            let s = Skeleton::preset(name).unwrap();
            let order = s.bfs_order();
            let mut pos = vec![usize::MAX; s.num_joints()];
            for (i, &j) in order.iter().enumerate() {
                assert_eq!(pos[j], usize::MAX, "{name}: joint {j} repeated");
                pos[j] = i;
            }
            assert_eq!(order[0], s.root());
            for &[p, c] in s.limbs() {
                assert!(pos[p] < pos[c], "{name}: limb {p}->{c}");
            }
            let depth = s.depths();
            assert!(order.windows(2).all(|w| depth[w[0]] <= depth[w[1]]));
        }
    }

    #[test]
    fn json_round_trip_keeps_field_order() {
        let s = Skeleton::preset("mpii16").unwrap();
        let json = s.to_json();
        let keys: Vec<_> = ["\"name\"", "\"joints\"", "\"limbs\"", "\"root\"", "\"oks_kappa\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Skeleton::from_json(&json).unwrap(), s);
        assert_eq!(s.head_segment(), Some((9, 8)));
        assert_eq!(Skeleton::preset("coco17").unwrap().head_segment(), None);
    }

    #[test]
    fn invalid_json_rejected() {
        let json = r#"{"name":"x","joints":["a","b"],"limbs":[[0,1]],"root":1,"oks_kappa":[1,1]}"#;
        assert!(Skeleton::from_json(json).is_err());
    }

    proptest::proptest! {
        #[test]
        fn random_trees_order_is_topological(
            parents in proptest::collection::vec(0usize..1000, 1..24),
            shuffle in proptest::collection::vec(0usize..1000, 25),
        ) {
            let k = parents.len() + 1;
            // Joint i+1 hangs below some earlier joint; then relabel randomly.
            let mut label: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                label.swap(i, shuffle[i] % (i + 1));
            }
            let limbs: Vec<[usize; 2]> = parents
                .iter()
                .enumerate()
                .map(|(i, &p)| [label[p % (i + 1)], label[i + 1]])
                .collect();
            let s = toy(limbs, label[0], k).unwrap();
            let order = s.bfs_order();
            let mut sorted = order.clone();
            sorted.sort_unstable();
            proptest::prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            proptest::prop_assert_eq!(order[0], s.root());
            let pos = |j: usize| order.iter().position(|&o| o == j).unwrap();
            for &[p, c] in s.limbs() {
                proptest::prop_assert!(pos(p) < pos(c));
            }
        }
    }
}
