//! Random node attacks in the poisoning setting.
//!
//! A target `v0` with degree `d` gets a budget `Δ = d + 2`: `⌊Δ/2⌋` of its
//! edges are removed and `⌈Δ/2⌉` edges to nodes of other classes are added
//! (removals beyond the degree shift to additions). Models are retrained on the
//! perturbed graph and the target's classification margin is compared with a
//! clean run using the same training seed.

use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, EnsembleConfig};
use crate::error::{Error, Result};
use crate::gcnn::{self, GcnnConfig};
use crate::graph::{normalize_adjacency, FeatureMatrix, Graph, LabelSet};
use crate::rng::{self, tags};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gcnn,
    Bayesian,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gcnn => "gcnn",
            Algorithm::Bayesian => "bayesian",
        }
    }

    fn index(self) -> u64 {
        match self {
            Algorithm::Gcnn => 0,
            Algorithm::Bayesian => 1,
        }
    }
}

/// `score(true) − max_{c ≠ true} score(c)`; positive iff the node is classified correctly.
pub fn classification_margin<T: Scalar>(scores: ArrayView1<'_, T>, true_class: usize) -> f64 {
    let own = scores[true_class].as_f64();
    let best_other = scores
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != true_class)
        .map(|(_, v)| v.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    if best_other == f64::NEG_INFINITY {
        own
    } else {
        own - best_other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub node: usize,
    pub true_class: usize,
    pub scores: Vec<f64>,
    pub margin: f64,
}

impl MarginRecord {
    pub fn new<T: Scalar>(node: usize, true_class: usize, scores: ArrayView1<'_, T>) -> Self {
        Self {
            node,
            true_class,
            scores: scores.iter().map(|v| v.as_f64()).collect(),
            margin: classification_margin(scores, true_class),
        }
    }

    /// Ties at zero count as misclassified.
    pub fn correct(&self) -> bool {
        self.margin > 0.0
    }
}

/// Margin records for every labeled node of `nodes`.
pub fn margin_records<T: Scalar>(z: &Array2<T>, labels: &LabelSet, nodes: &[usize]) -> Vec<MarginRecord> {
    nodes
        .iter()
        .filter_map(|&v| labels.label(v).map(|c| MarginRecord::new(v, c, z.row(v))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGroup {
    HighMargin,
    LowMargin,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub node: usize,
    pub group: TargetGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSizes {
    pub high: usize,
    pub low: usize,
    pub random: usize,
}

impl Default for SelectionSizes {
    fn default() -> Self {
        Self { high: 10, low: 10, random: 20 }
    }
}

/// Per algorithm: the `high` largest margins, the `low` smallest positive margins,
/// then `random` nodes shared by all algorithms, drawn from the nodes every
/// algorithm classifies correctly and no algorithm picked by margin.
/// Margin ties are broken by node id.
pub fn select_targets(margins: &[Vec<MarginRecord>], sizes: SelectionSizes, seed: u64) -> Result<Vec<Vec<Target>>> {
    if margins.is_empty() {
        return Err(Error::InvalidParameter("no algorithms to select targets for".into()));
    }
    let mut picked: Vec<Vec<Target>> = Vec::with_capacity(margins.len());
    for (alg, recs) in margins.iter().enumerate() {
        let mut correct: Vec<&MarginRecord> = recs.iter().filter(|r| r.correct()).collect();
        if correct.len() < sizes.high + sizes.low {
            return Err(Error::InsufficientCandidates(format!(
                "algorithm {alg} classifies {} nodes correctly, {} needed for margin picks",
                correct.len(),
                sizes.high + sizes.low
            )));
        }
        correct.sort_by(|x, y| y.margin.total_cmp(&x.margin).then(x.node.cmp(&y.node)));
        let mut list: Vec<Target> = correct[..sizes.high]
            .iter()
            .map(|r| Target { node: r.node, group: TargetGroup::HighMargin })
            .collect();
        list.extend(
            correct[correct.len() - sizes.low..]
                .iter()
                .rev()
                .map(|r| Target { node: r.node, group: TargetGroup::LowMargin }),
        );
        picked.push(list);
    }
    let excluded: std::collections::BTreeSet<usize> = picked.iter().flatten().map(|t| t.node).collect();
    let mut pool: Option<std::collections::BTreeSet<usize>> = None;
    for recs in margins {
        let c: std::collections::BTreeSet<usize> = recs.iter().filter(|r| r.correct()).map(|r| r.node).collect();
        pool = Some(match pool {
            None => c,
            Some(p) => p.intersection(&c).copied().collect(),
        });
    }
    let pool: Vec<usize> = pool.unwrap_or_default().into_iter().filter(|v| !excluded.contains(v)).collect();
    if pool.len() < sizes.random {
        return Err(Error::InsufficientCandidates(format!(
            "{} commonly correct nodes outside the margin picks, {} needed",
            pool.len(),
            sizes.random
        )));
    }
    let mut r = rng::rng_from(seed, &[tags::ATTACK, 0]);
    let mut shared: Vec<usize> = pool.choose_multiple(&mut r, sizes.random).copied().collect();
    shared.sort_unstable();
    for list in &mut picked {
        list.extend(shared.iter().map(|&node| Target { node, group: TargetGroup::Random }));
    }
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub target: usize,
    pub budget: usize,
    pub removals: Vec<(usize, usize)>,
    pub additions: Vec<(usize, usize)>,
}

/// Draws a perturbation for `target`: uniform removals among its neighbors and
/// uniform additions among labeled non-neighbors of a different class.
pub fn plan_attack(g: &Graph, labels: &LabelSet, target: usize, budget: Option<usize>, seed: u64) -> Result<AttackPlan> {
    if target >= g.n_nodes() {
        return Err(Error::InvalidParameter(format!("target {target} out of range")));
    }
    let own = labels
        .label(target)
        .ok_or_else(|| Error::InvalidParameter(format!("target {target} has no label")))?;
    let nbrs = g.neighbors(target);
    let budget = budget.unwrap_or(nbrs.len() + 2);
    let n_remove = (budget / 2).min(nbrs.len());
    let n_add = budget - n_remove;
    let mut r = rng::rng_from(seed, &[tags::ATTACK, 1, target as u64]);
    let mut removals: Vec<(usize, usize)> = nbrs
        .choose_multiple(&mut r, n_remove)
        .map(|&b| (target.min(b), target.max(b)))
        .collect();
    removals.sort_unstable();
    let candidates: Vec<usize> = (0..g.n_nodes())
        .filter(|&b| b != target && nbrs.binary_search(&b).is_err())
        .filter(|&b| labels.label(b).is_some_and(|c| c != own))
        .collect();
    if candidates.len() < n_add {
        return Err(Error::InsufficientCandidates(format!(
            "target {target} needs {n_add} cross-class additions, {} eligible nodes",
            candidates.len()
        )));
    }
    let mut additions: Vec<(usize, usize)> = candidates
        .choose_multiple(&mut r, n_add)
        .map(|&b| (target.min(b), target.max(b)))
        .collect();
    additions.sort_unstable();
    Ok(AttackPlan { target, budget, removals, additions })
}

/// Applies `plan`; every edge not incident to the target is kept.
pub fn perturb(g: &Graph, plan: &AttackPlan) -> Result<Graph> {
    let incident = |&(a, b): &(usize, usize)| a == plan.target || b == plan.target;
    if let Some(e) = plan.removals.iter().find(|e| !incident(e) || !g.has_edge(e.0, e.1)) {
        return Err(Error::InvalidParameter(format!("removal {e:?} is not an edge of target {}", plan.target)));
    }
    if let Some(e) = plan.additions.iter().find(|e| !incident(e) || g.has_edge(e.0, e.1)) {
        return Err(Error::InvalidParameter(format!("addition {e:?} is not a new edge of target {}", plan.target)));
    }
    g.edited(&plan.removals, &plan.additions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub algorithms: Vec<Algorithm>,
    pub gcnn: GcnnConfig,
    pub ensemble: EnsembleConfig,
    /// Clean runs whose mean scores rank targets.
    pub selection_trials: usize,
    /// Perturbations per target.
    pub eval_trials: usize,
    pub sizes: SelectionSizes,
    /// Fixed budget for every target instead of `degree + 2`.
    pub budget_override: Option<usize>,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Gcnn, Algorithm::Bayesian],
            gcnn: GcnnConfig::default(),
            ensemble: EnsembleConfig::default(),
            selection_trials: 10,
            eval_trials: 5,
            sizes: SelectionSizes::default(),
            budget_override: None,
            seed: 0,
        }
    }
}

/// One target, trial and algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub target: usize,
    pub group: TargetGroup,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub budget: usize,
    pub pre_margin: f64,
    pub post_margin: f64,
    pub pre_correct: bool,
    pub post_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Option<TargetGroup>,
    pub n: usize,
    pub no_attack_accuracy: f64,
    pub attack_accuracy: f64,
    pub no_attack_mean_margin: f64,
    pub attack_mean_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// All targets, then one entry per target group.
    pub overall: GroupSummary,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub rows: Vec<AttackRow>,
    pub summaries: Vec<AlgorithmSummary>,
}

impl AttackReport {
    pub fn summary(&self, alg: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == alg)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let e = |err| Error::io(path, err);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(e)?);
        writeln!(w, "target,group,trial,algorithm,budget,pre_margin,post_margin,pre_correct,post_correct").map_err(e)?;
        for r in &self.rows {
            let group = match r.group {
                TargetGroup::HighMargin => "high_margin",
                TargetGroup::LowMargin => "low_margin",
                TargetGroup::Random => "random",
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.target,
                group,
                r.trial,
                r.algorithm.name(),
                r.budget,
                r.pre_margin,
                r.post_margin,
                r.pre_correct,
                r.post_correct
            )
            .map_err(e)?;
        }
        w.flush().map_err(e)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summaries)?)
    }
}

fn summarize(rows: &[&AttackRow], group: Option<TargetGroup>) -> GroupSummary {
    let n = rows.len();
    let mean = |f: &dyn Fn(&AttackRow) -> f64| if n == 0 { 0.0 } else { rows.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
    GroupSummary {
        group,
        n,
        no_attack_accuracy: mean(&|r| f64::from(u8::from(r.pre_correct))),
        attack_accuracy: mean(&|r| f64::from(u8::from(r.post_correct))),
        no_attack_mean_margin: mean(&|r| r.pre_margin),
        attack_mean_margin: mean(&|r| r.post_margin),
    }
}

/// Softmax of `alg` trained on `g` with master seed `seed`.
fn fit_predict<T: Scalar>(
    alg: Algorithm,
    g: &Graph,
    x: &FeatureMatrix<T>,
    labels: &LabelSet,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<Array2<T>> {
    match alg {
        Algorithm::Gcnn => {
            let a = normalize_adjacency::<T>(g);
            let gcfg = GcnnConfig { seed, ..cfg.gcnn.clone() };
            let w = gcnn::train(&a, x, labels, &gcfg, None)?.weights;
            gcnn::predict(&w, gcfg.activation, &a, x)
        }
        Algorithm::Bayesian => {
            let ecfg = EnsembleConfig { seed, keep_samples: false, ..cfg.ensemble.clone() };
            Ok(ensemble::run(g, x, labels, &ecfg)?.prediction.mean)
        }
    }
}

/// Training seed of a clean or perturbed run for (`alg`, `phase`, `trial`).
fn trial_seed(cfg: &AttackConfig, alg: Algorithm, phase: u64, trial: usize) -> u64 {
    rng::derive_seed(cfg.seed, &[tags::ATTACK, 2, alg.index(), phase, trial as u64])
}

/// Target selection on clean runs, then `eval_trials` perturbations per target.
///
/// The clean ("no attack") and perturbed runs of one trial share a training
/// seed, so a zero budget reproduces the clean margins exactly. Perturbations
/// depend only on the target and trial, so algorithms face identical graphs.
pub fn run_attack_experiment<T: Scalar>(
    g: &Graph,
    x: &FeatureMatrix<T>,
    labels: &LabelSet,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    if cfg.algorithms.is_empty() || cfg.selection_trials == 0 || cfg.eval_trials == 0 {
        return Err(Error::InvalidParameter("need at least one algorithm, selection trial and eval trial".into()));
    }
    let test = labels.test();
    let mut margins = Vec::with_capacity(cfg.algorithms.len());
    for &alg in &cfg.algorithms {
        let runs: Vec<Array2<T>> = (0..cfg.selection_trials)
            .into_par_iter()
            .map(|t| fit_predict(alg, g, x, labels, cfg, trial_seed(cfg, alg, 0, t)))
            .collect::<Result<_>>()?;
        let mean = ensemble::aggregate(&runs, false)?.mean;
        margins.push(margin_records(&mean, labels, test));
    }
    let targets = select_targets(&margins, cfg.sizes, cfg.seed)?;

    let mut rows = Vec::new();
    for (ai, &alg) in cfg.algorithms.iter().enumerate() {
        let clean: Vec<Array2<T>> = (0..cfg.eval_trials)
            .into_par_iter()
            .map(|t| fit_predict(alg, g, x, labels, cfg, trial_seed(cfg, alg, 1, t)))
            .collect::<Result<_>>()?;
        let cells: Vec<(Target, usize)> = targets[ai]
            .iter()
            .flat_map(|&tg| (0..cfg.eval_trials).map(move |t| (tg, t)))
            .collect();
        let alg_rows: Vec<AttackRow> = cells
            .par_iter()
            .map(|&(tg, t)| {
                let plan_seed = rng::derive_seed(cfg.seed, &[tags::ATTACK, 3, t as u64]);
                let plan = plan_attack(g, labels, tg.node, cfg.budget_override, plan_seed)?;
                let attacked = perturb(g, &plan)?;
                let z = fit_predict(alg, &attacked, x, labels, cfg, trial_seed(cfg, alg, 1, t))?;
                let c = labels.label(tg.node).expect("targets are labeled");
                let pre = classification_margin(clean[t].row(tg.node), c);
                let post = classification_margin(z.row(tg.node), c);
                Ok(AttackRow {
                    target: tg.node,
                    group: tg.group,
                    trial: t,
                    algorithm: alg,
                    budget: plan.budget,
                    pre_margin: pre,
                    post_margin: post,
                    pre_correct: pre > 0.0,
                    post_correct: post > 0.0,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(alg_rows);
    }

    let summaries = cfg
        .algorithms
        .iter()
        .map(|&alg| {
            let mine: Vec<&AttackRow> = rows.iter().filter(|r| r.algorithm == alg).collect();
            let groups = [TargetGroup::HighMargin, TargetGroup::LowMargin, TargetGroup::Random]
                .into_iter()
                .map(|grp| {
                    let sub: Vec<&AttackRow> = mine.iter().copied().filter(|r| r.group == grp).collect();
                    summarize(&sub, Some(grp))
                })
                .collect();
            AlgorithmSummary { algorithm: alg, overall: summarize(&mine, None), groups }
        })
        .collect();
    Ok(AttackReport { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{planted_dataset, PlantedConfig};
    use ndarray::array;
    use rand::Rng as _;

    #[test]
    fn margin_cases() {
        assert!((classification_margin(array![0.7, 0.2, 0.1].view(), 0) - 0.5).abs() < 1e-15);
        assert_eq!(classification_margin(array![0.25, 0.25, 0.25, 0.25].view(), 2), 0.0);
        assert!(classification_margin(array![0.2, 0.5, 0.3].view(), 0) < 0.0);
        let rec = MarginRecord::new(3, 1, array![0.5, 0.5].view());
        assert!(!rec.correct());
    }

    fn records(margins: &[(usize, f64)]) -> Vec<MarginRecord> {
        margins
            .iter()
            .map(|&(node, m)| MarginRecord { node, true_class: 0, scores: vec![], margin: m })
            .collect()
    }

    #[test]
    fn selection_matches_sort_oracle() {
        let mut r = rng::rng(2);
        let a: Vec<(usize, f64)> = (0..120).map(|v| (v, r.random_range(-0.5..1.0))).collect();
        let b: Vec<(usize, f64)> = (0..120).map(|v| (v, r.random_range(-0.5..1.0))).collect();
        let sel = select_targets(&[records(&a), records(&b)], SelectionSizes::default(), 5).unwrap();
        for (list, m) in sel.iter().zip([&a, &b]) {
            assert_eq!(list.len(), 40);
            let mut pos: Vec<(usize, f64)> = m.iter().copied().filter(|p| p.1 > 0.0).collect();
            pos.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
            let high: Vec<usize> = pos[..10].iter().map(|p| p.0).collect();
            let low: Vec<usize> = pos[pos.len() - 10..].iter().rev().map(|p| p.0).collect();
            assert_eq!(list[..10].iter().map(|t| t.node).collect::<Vec<_>>(), high);
            assert_eq!(list[10..20].iter().map(|t| t.node).collect::<Vec<_>>(), low);
        }
        assert_eq!(sel[0][20..], sel[1][20..]);
        let picks: Vec<usize> = sel.iter().flat_map(|l| l[..20].iter().map(|t| t.node)).collect();
        for t in &sel[0][20..] {
            assert!(a[t.node].1 > 0.0 && b[t.node].1 > 0.0);
            assert!(!picks.contains(&t.node));
        }
        assert_eq!(sel, select_targets(&[records(&a), records(&b)], SelectionSizes::default(), 5).unwrap());
        assert_ne!(sel, select_targets(&[records(&a), records(&b)], SelectionSizes::default(), 6).unwrap());
    }

    #[test]
    fn too_few_correct_is_an_error() {
        let few: Vec<(usize, f64)> = (0..30).map(|v| (v, if v < 15 { 0.3 } else { -0.1 })).collect();
        assert!(matches!(
            select_targets(&[records(&few)], SelectionSizes::default(), 0),
            Err(Error::InsufficientCandidates(_))
        ));
    }

    fn star_labels() -> (Graph, LabelSet) {
        // node 0 has neighbors 1..=4; nodes 5.. form a path
        let edges: Vec<(usize, usize)> = (1..=4).map(|b| (0, b)).chain((5..19).map(|a| (a, a + 1))).collect();
        let g = Graph::from_edges(20, edges).unwrap();
        let labels = LabelSet::from_parts(3, (0..20).map(|v| v % 3).collect(), vec![], vec![]).unwrap();
        (g, labels)
    }

    #[test]
    fn plan_respects_budget_and_labels() {
        let (g, l) = star_labels();
        let plan = plan_attack(&g, &l, 0, None, 3).unwrap();
        assert_eq!(plan.budget, 6);
        assert_eq!((plan.removals.len(), plan.additions.len()), (3, 3));
        assert!(plan.additions.iter().all(|&(a, b)| l.label(a.max(b)) != l.label(0)));
        let h = perturb(&g, &plan).unwrap();
        assert_eq!(h.degree(0), 4);
        for &(a, b) in g.edges() {
            if a != 0 && b != 0 {
                assert!(h.has_edge(a, b));
            }
        }
        assert_eq!(h.n_edges(), g.n_edges());
    }

    #[test]
    fn odd_budget_and_shortfall() {
        let (g, l) = star_labels();
        let odd = plan_attack(&g, &l, 0, Some(5), 1).unwrap();
        assert_eq!((odd.removals.len(), odd.additions.len()), (2, 3));
        // node 5 has one neighbor: Δ = 3 → 1 removal, 2 additions; Δ = 8 → 1 removal, 7 additions
        let p = plan_attack(&g, &l, 5, None, 1).unwrap();
        assert_eq!((p.removals.len(), p.additions.len()), (1, 2));
        let p = plan_attack(&g, &l, 5, Some(8), 1).unwrap();
        assert_eq!((p.removals.len(), p.additions.len()), (1, 7));
        assert!(matches!(plan_attack(&g, &l, 5, Some(40), 1), Err(Error::InsufficientCandidates(_))));
    }

    #[test]
    fn empty_plan_and_invalid_plans() {
        let (g, l) = star_labels();
        let empty = plan_attack(&g, &l, 0, Some(0), 1).unwrap();
        assert_eq!(perturb(&g, &empty).unwrap(), g);
        let bad = AttackPlan { target: 0, budget: 1, removals: vec![(5, 6)], additions: vec![] };
        assert!(perturb(&g, &bad).is_err());
        let bad = AttackPlan { target: 0, budget: 1, removals: vec![], additions: vec![(0, 1)] };
        assert!(perturb(&g, &bad).is_err());
    }

    fn small_cfg(budget: Option<usize>) -> AttackConfig {
        AttackConfig {
            algorithms: vec![Algorithm::Gcnn],
            gcnn: GcnnConfig { epochs: 40, ..Default::default() },
            selection_trials: 2,
            eval_trials: 2,
            sizes: SelectionSizes { high: 3, low: 3, random: 4 },
            budget_override: budget,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn zero_budget_control_and_reproducibility() {
        let ds = planted_dataset(&PlantedConfig { n_nodes: 150, seed: 2, ..Default::default() }).unwrap();
        let rep = run_attack_experiment(&ds.graph, &ds.features, &ds.labels, &small_cfg(Some(0))).unwrap();
        assert_eq!(rep.rows.len(), 10 * 2);
        for r in &rep.rows {
            assert_eq!(r.pre_margin, r.post_margin);
        }
        let s = rep.summary(Algorithm::Gcnn).unwrap();
        assert_eq!(s.overall.attack_accuracy, s.overall.no_attack_accuracy);
        let again = run_attack_experiment(&ds.graph, &ds.features, &ds.labels, &small_cfg(Some(0))).unwrap();
        assert_eq!(rep, again);

        let attacked = run_attack_experiment(&ds.graph, &ds.features, &ds.labels, &small_cfg(None)).unwrap();
        let sa = attacked.summary(Algorithm::Gcnn).unwrap();
        assert!(sa.overall.attack_mean_margin < sa.overall.no_attack_mean_margin);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attack.csv");
        attacked.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(attacked.summary_json().unwrap().contains("attack_accuracy"));
    }
}
