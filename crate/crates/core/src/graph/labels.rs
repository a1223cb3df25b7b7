use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Role a node plays in the container's canonical partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    TrainPool,
    Test,
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// First `per_class` train-pool nodes of each class, in container order.
    Fixed,
    /// `per_class` nodes per class drawn uniformly from all labeled non-test nodes.
    Random,
}

/// Partial labels with disjoint train and test node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    n_classes: usize,
    labels: Vec<Option<usize>>,
    roles: Vec<NodeRole>,
    /// Node ids in the order the container listed them.
    order: Vec<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
    in_train: Vec<bool>,
}

impl LabelSet {
    /// `order` lists nodes as they appeared in the source; nodes absent from it
    /// are appended in id order. The initial train set is the whole train pool
    /// and the test set is every node with role `Test`.
    pub fn new(
        n_classes: usize,
        labels: Vec<Option<usize>>,
        roles: Vec<NodeRole>,
        order: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if roles.len() != n {
            return Err(Error::Shape(format!("{} labels vs {} roles", n, roles.len())));
        }
        if let Some((node, c)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= n_classes).map(|c| (i, c)))
        {
            return Err(Error::InvalidParameter(format!(
                "node {node} has class {c} but only {n_classes} classes"
            )));
        }
        let mut seen = vec![false; n];
        let mut full_order = Vec::with_capacity(n);
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "node order contains invalid or repeated node {i}"
                )));
            }
            seen[i] = true;
            full_order.push(i);
        }
        full_order.extend((0..n).filter(|&i| !seen[i]));

        let pool: Vec<usize> = full_order
            .iter()
            .copied()
            .filter(|&i| roles[i] == NodeRole::TrainPool)
            .collect();
        let test: Vec<usize> = (0..n).filter(|&i| roles[i] == NodeRole::Test).collect();
        Self::with_masks(n_classes, labels, roles, full_order, pool, test)
    }

    fn with_masks(
        n_classes: usize,
        labels: Vec<Option<usize>>,
        roles: Vec<NodeRole>,
        order: Vec<usize>,
        mut train: Vec<usize>,
        mut test: Vec<usize>,
    ) -> Result<Self> {
        train.sort_unstable();
        train.dedup();
        test.sort_unstable();
        test.dedup();
        let mut in_train = vec![false; labels.len()];
        for &i in &train {
            if labels[i].is_none() {
                return Err(Error::InvalidParameter(format!("train node {i} has no label")));
            }
            in_train[i] = true;
        }
        for &i in &test {
            if labels[i].is_none() {
                return Err(Error::InvalidParameter(format!("test node {i} has no label")));
            }
            if in_train[i] {
                return Err(Error::InvalidParameter(format!(
                    "node {i} is in both train and test sets"
                )));
            }
        }
        Ok(Self {
            n_classes,
            labels,
            roles,
            order,
            train,
            test,
            in_train,
        })
    }

    /// Replaces the train set, keeping the test set.
    pub fn with_train(&self, train: Vec<usize>) -> Result<Self> {
        Self::with_masks(
            self.n_classes,
            self.labels.clone(),
            self.roles.clone(),
            self.order.clone(),
            train,
            self.test.clone(),
        )
    }

    /// Convenience for tests and synthetic data: every node labeled, explicit masks.
    pub fn from_parts(
        n_classes: usize,
        labels: Vec<usize>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut roles = vec![NodeRole::Unlabeled; n];
        for &i in &train {
            if i < n {
                roles[i] = NodeRole::TrainPool;
            }
        }
        for &i in &test {
            if i < n {
                roles[i] = NodeRole::Test;
            }
        }
        if let Some(&i) = train.iter().chain(&test).find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!("node {i} out of range")));
        }
        Self::with_masks(
            n_classes,
            labels.into_iter().map(Some).collect(),
            roles,
            (0..n).collect(),
            train,
            test,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn is_train(&self, node: usize) -> bool {
        self.in_train[node]
    }

    pub fn container_order(&self) -> &[usize] {
        &self.order
    }

    pub fn class_counts(&self, nodes: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in nodes {
            if let Some(c) = self.labels[i] {
                counts[c] += 1;
            }
        }
        counts
    }
}

/// Selects a train set with exactly `per_class` nodes of every class.
/// The test set stays as designated by the container.
pub fn make_split(labels: &LabelSet, per_class: usize, mode: SplitMode, seed: u64) -> Result<LabelSet> {
    let k = labels.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    match mode {
        SplitMode::Fixed => {
            for &i in labels.container_order() {
                if labels.role(i) == NodeRole::TrainPool {
                    if let Some(c) = labels.label(i) {
                        by_class[c].push(i);
                    }
                }
            }
        }
        SplitMode::Random => {
            for i in 0..labels.n_nodes() {
                if labels.role(i) != NodeRole::Test {
                    if let Some(c) = labels.label(i) {
                        by_class[c].push(i);
                    }
                }
            }
        }
    }
    if let Some((class, nodes)) = by_class.iter().enumerate().find(|(_, v)| v.len() < per_class) {
        return Err(Error::InsufficientLabels {
            class,
            available: nodes.len(),
            required: per_class,
        });
    }
    let mut train = Vec::with_capacity(per_class * k);
    match mode {
        SplitMode::Fixed => {
            for nodes in &by_class {
                train.extend_from_slice(&nodes[..per_class]);
            }
        }
        SplitMode::Random => {
            let mut rng = rng::rng_from(seed, &[tags::SPLIT]);
            for nodes in &by_class {
                train.extend(nodes.choose_multiple(&mut rng, per_class).copied());
            }
        }
    }
    labels.with_train(train)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 7 classes, 30 pool nodes per class interleaved, 50 test nodes, rest unlabeled.
    fn toy() -> LabelSet {
        let k = 7;
        let n = 7 * 30 + 50 + 20;
        let mut labels = vec![None; n];
        let mut roles = vec![NodeRole::Unlabeled; n];
        for i in 0..n {
            labels[i] = Some(i % k);
            roles[i] = if i < 210 {
                NodeRole::TrainPool
            } else if i < 260 {
                NodeRole::Test
            } else {
                NodeRole::Unlabeled
            };
        }
        LabelSet::new(k, labels, roles, (0..n).collect()).unwrap()
    }

    #[test]
    fn fixed_split_sizes_and_determinism() {
        let l = toy();
        let s = make_split(&l, 20, SplitMode::Fixed, 0).unwrap();
        assert_eq!(s.train().len(), 140);
        assert_eq!(s.class_counts(s.train()), vec![20; 7]);
        let a = make_split(&l, 5, SplitMode::Fixed, 1).unwrap();
        let b = make_split(&l, 5, SplitMode::Fixed, 99).unwrap();
        assert_eq!(a.train(), b.train());
        // first five of each class in container order
        assert_eq!(a.train(), (0..35).collect::<Vec<_>>().as_slice());
        assert_eq!(a.test(), l.test());
    }

    #[test]
    fn random_split_respects_seed() {
        let l = toy();
        let a = make_split(&l, 10, SplitMode::Random, 1).unwrap();
        let a2 = make_split(&l, 10, SplitMode::Random, 1).unwrap();
        assert_eq!(a.train(), a2.train());
        assert_eq!(a.class_counts(a.train()), vec![10; 7]);
        assert!(a.train().iter().all(|&i| l.role(i) != NodeRole::Test));
        let mut differing = 0;
        for s in 0..100u64 {
            let x = make_split(&l, 10, SplitMode::Random, 2 * s + 1).unwrap();
            let y = make_split(&l, 10, SplitMode::Random, 2 * s + 2).unwrap();
            differing += usize::from(x.train() != y.train());
        }
        assert_eq!(differing, 100);
    }

    #[test]
    fn insufficient_class_is_named() {
        let l = toy();
        match make_split(&l, 31, SplitMode::Fixed, 0) {
            Err(Error::InsufficientLabels { class, available, required }) => {
                assert_eq!((class, available, required), (0, 30, 31));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn train_test_overlap_rejected() {
        assert!(LabelSet::from_parts(2, vec![0, 1, 0], vec![0, 1], vec![1, 2]).is_err());
    }

    #[test]
    fn class_out_of_range_rejected() {
        assert!(LabelSet::new(2, vec![Some(2)], vec![NodeRole::Test], vec![0]).is_err());
    }
}
