//! Finite metric transition systems and the abstract-disturbance simulation
//! check.
//!
//! `T` simulates `S` up to disturbance `δ` when there is a relation `R` with
//! (1) `d(x, y) ≤ δ` on `R`, (2) every state of `S` related to some state of
//! `T`, and (3) for `(x, y) ∈ R`, every transition `x → x′` of the
//! δ-perturbed `S` is matched by some `y → y′` of `T` with `(x′, y′) ∈ R`.

mod quantize;

pub use quantize::{quantize_embedding, snap_to_grid, StateGrid};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{sup_dist, Error, Result};

/// Distances within this much of `δ` count as `≤ δ`.
pub const DIST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteTransitionSystem {
    pub states: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// `(source, label, target)`, sorted and without duplicates.
    pub transitions: Vec<(usize, usize, usize)>,
}

impl FiniteTransitionSystem {
    pub fn new(states: Vec<Vec<f64>>, labels: Vec<String>, transitions: Vec<(usize, usize, usize)>) -> Result<Self> {
        let mut s = Self { states, labels, transitions };
        s.transitions.sort_unstable();
        s.transitions.dedup();
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.states.first() else {
            return Err(Error::InvalidInput("transition system without states".into()));
        };
        if self.states.iter().any(|s| s.len() != first.len()) {
            return Err(Error::InvalidInput("states of mixed dimension".into()));
        }
        if self.states.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state coordinate".into()));
        }
        let (ns, nl) = (self.states.len(), self.labels.len());
        if let Some(t) = self.transitions.iter().find(|&&(a, u, b)| a >= ns || b >= ns || u >= nl) {
            return Err(Error::InvalidInput(format!("transition {t:?} out of range")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dist(&self, a: usize, other: &FiniteTransitionSystem, b: usize) -> f64 {
        sup_dist(&self.states[a], &other.states[b])
    }

    /// `(label, target)` pairs leaving each state.
    fn successors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.len()];
        for &(a, u, b) in &self.transitions {
            out[a].push((u, b));
        }
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(raw.states, raw.labels, raw.transitions)
    }

    /// Graphviz rendering, one node per state labelled with its coordinates.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph \"{name}\" {{\n");
        for (i, x) in self.states.iter().enumerate() {
            let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "  {i} [label=\"{i}: ({})\"];", coords.join(", "));
        }
        for &(a, u, b) in &self.transitions {
            let _ = writeln!(s, "  {a} -> {b} [label=\"{}\"];", self.labels[u].replace('"', "\\\""));
        }
        s.push_str("}\n");
        s
    }
}

/// `𝔖^δ`: `x →ᵘ x′` whenever `S` has `x →ᵘ x″` with `d(x″, x′) ≤ δ`.
pub fn perturb(s: &FiniteTransitionSystem, delta: f64) -> Result<FiniteTransitionSystem> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be ≥ 0, got {delta}")));
    }
    let mut trans = BTreeSet::new();
    for &(a, u, b) in &s.transitions {
        for c in 0..s.len() {
            if s.dist(b, s, c) <= delta + DIST_TOL {
                trans.insert((a, u, c));
            }
        }
    }
    FiniteTransitionSystem::new(s.states.clone(), s.labels.clone(), trans.into_iter().collect())
}

/// How a `T` transition may answer an `S` transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Any `T` label.
    #[default]
    Permissive,
    /// Only a `T` label with the same name.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRelation {
    /// `(state of S, state of T)`, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub delta: f64,
}

/// One pair removed during refinement and the `𝔖^δ` transition that had no
/// match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deletion {
    pub pair: (usize, usize),
    pub label: String,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    /// A state of `S` left without a partner.
    pub state: usize,
    pub trace: Vec<Deletion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SimOutcome {
    Simulates(SimRelation),
    Fails(Counterexample),
}

impl SimOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, SimOutcome::Simulates(_))
    }
}

struct Matcher<'a> {
    s_succ: Vec<Vec<(usize, usize)>>,
    t_succ: Vec<Vec<(usize, usize)>>,
    /// `S` label index → `T` label index with the same name.
    label_map: Vec<Option<usize>>,
    mode: LabelMode,
    s_labels: &'a [String],
}

impl<'a> Matcher<'a> {
    fn new(sd: &'a FiniteTransitionSystem, t: &FiniteTransitionSystem, mode: LabelMode) -> Self {
        Self {
            s_succ: sd.successors(),
            t_succ: t.successors(),
            label_map: sd.labels.iter().map(|l| t.labels.iter().position(|m| m == l)).collect(),
            mode,
            s_labels: &sd.labels,
        }
    }

    /// First `𝔖^δ` transition of `x` with no `T` answer from `y` into `rel`.
    fn unmatched(&self, rel: &[Vec<bool>], x: usize, y: usize) -> Option<(usize, usize)> {
        self.s_succ[x].iter().copied().find(|&(u, xp)| {
            !self.t_succ[y].iter().any(|&(v, yp)| {
                rel[xp][yp] && (self.mode == LabelMode::Permissive || self.label_map[u] == Some(v))
            })
        })
    }
}

fn initial_relation(s: &FiniteTransitionSystem, t: &FiniteTransitionSystem, delta: f64) -> Vec<Vec<bool>> {
    (0..s.len()).map(|x| (0..t.len()).map(|y| s.dist(x, t, y) <= delta + DIST_TOL).collect()).collect()
}

fn check_inputs(s: &FiniteTransitionSystem, t: &FiniteTransitionSystem, delta: f64) -> Result<()> {
    s.validate()?;
    t.validate()?;
    if s.dim() != t.dim() {
        return Err(Error::InvalidInput("systems live in different dimensions".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be ≥ 0, got {delta}")));
    }
    Ok(())
}

/// Greatest relation satisfying conditions (1) and (3), with the deletion
/// trace of the refinement.
pub fn greatest_relation(
    s: &FiniteTransitionSystem,
    t: &FiniteTransitionSystem,
    delta: f64,
    mode: LabelMode,
) -> Result<(Vec<Vec<bool>>, Vec<Deletion>)> {
    check_inputs(s, t, delta)?;
    let sd = perturb(s, delta)?;
    let matcher = Matcher::new(&sd, t, mode);
    let mut rel = initial_relation(s, t, delta);
    let mut trace = Vec::new();
    loop {
        let mut changed = false;
        for x in 0..s.len() {
            for y in 0..t.len() {
                if !rel[x][y] {
                    continue;
                }
                if let Some((u, xp)) = matcher.unmatched(&rel, x, y) {
                    rel[x][y] = false;
                    changed = true;
                    trace.push(Deletion { pair: (x, y), label: matcher.s_labels[u].clone(), target: xp });
                }
            }
        }
        if !changed {
            return Ok((rel, trace));
        }
    }
}

/// Decide whether `t` simulates `s` up to disturbance `delta`.
pub fn check_ad_sim(s: &FiniteTransitionSystem, t: &FiniteTransitionSystem, delta: f64, mode: LabelMode) -> Result<SimOutcome> {
    let (rel, trace) = greatest_relation(s, t, delta, mode)?;
    if let Some(x) = rel.iter().position(|row| !row.iter().any(|&b| b)) {
        return Ok(SimOutcome::Fails(Counterexample { state: x, trace }));
    }
    let pairs = rel
        .iter()
        .enumerate()
        .flat_map(|(x, row)| row.iter().enumerate().filter(|p| *p.1).map(move |(y, _)| (x, y)))
        .collect();
    Ok(SimOutcome::Simulates(SimRelation { pairs, delta }))
}

/// Direct check of conditions (1)–(3) for a given relation.
pub fn satisfies_conditions(
    s: &FiniteTransitionSystem,
    t: &FiniteTransitionSystem,
    delta: f64,
    mode: LabelMode,
    pairs: &[(usize, usize)],
) -> Result<bool> {
    check_inputs(s, t, delta)?;
    let mut rel = vec![vec![false; t.len()]; s.len()];
    for &(x, y) in pairs {
        if x >= s.len() || y >= t.len() {
            return Ok(false);
        }
        rel[x][y] = true;
    }
    Ok(relation_ok(s, t, delta, mode, &rel, true))
}

fn relation_ok(
    s: &FiniteTransitionSystem,
    t: &FiniteTransitionSystem,
    delta: f64,
    mode: LabelMode,
    rel: &[Vec<bool>],
    need_total: bool,
) -> bool {
    let sd = perturb(s, delta).expect("validated delta");
    let matcher = Matcher::new(&sd, t, mode);
    for x in 0..s.len() {
        if need_total && !rel[x].iter().any(|&b| b) {
            return false;
        }
        for y in 0..t.len() {
            if rel[x][y] && (s.dist(x, t, y) > delta + DIST_TOL || matcher.unmatched(rel, x, y).is_some()) {
                return false;
            }
        }
    }
    true
}

/// Exhaustive search over all relations (only for `|S|·|T| ≤ 20`).
/// Returns whether a simulation exists and the union of all relations
/// satisfying conditions (1) and (3).
pub fn brute_force_ad_sim(
    s: &FiniteTransitionSystem,
    t: &FiniteTransitionSystem,
    delta: f64,
    mode: LabelMode,
) -> Result<(bool, Vec<Vec<bool>>)> {
    check_inputs(s, t, delta)?;
    let cells = s.len() * t.len();
    if cells > 20 {
        return Err(Error::InvalidInput(format!("{cells} pairs is too many to enumerate")));
    }
    let mut exists = false;
    let mut union = vec![vec![false; t.len()]; s.len()];
    for mask in 0u32..(1u32 << cells) {
        let rel: Vec<Vec<bool>> = (0..s.len())
            .map(|x| (0..t.len()).map(|y| mask >> (x * t.len() + y) & 1 == 1).collect())
            .collect();
        if relation_ok(s, t, delta, mode, &rel, false) {
            for x in 0..s.len() {
                for y in 0..t.len() {
                    union[x][y] |= rel[x][y];
                }
            }
            exists |= rel.iter().all(|row| row.iter().any(|&b| b));
        }
    }
    Ok((exists, union))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize, trans: Vec<(usize, usize, usize)>) -> FiniteTransitionSystem {
        FiniteTransitionSystem::new((0..n).map(|i| vec![i as f64]).collect(), vec!["a".into(), "b".into()], trans).unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> FiniteTransitionSystem {
        let states = (0..n).map(|_| vec![rng.random_range(0..3) as f64]).collect();
        let labels: Vec<String> = (0..labels).map(|l| format!("l{l}")).collect();
        let mut trans = Vec::new();
        for a in 0..n {
            for u in 0..labels.len() {
                for b in 0..n {
                    if rng.random_bool(0.35) {
                        trans.push((a, u, b));
                    }
                }
            }
        }
        FiniteTransitionSystem::new(states, labels, trans).unwrap()
    }

    #[test]
    fn perturb_examples() {
        let s = line(3, vec![(0, 0, 1)]);
        assert_eq!(perturb(&s, 0.0).unwrap(), s);
        assert_eq!(perturb(&s, 1.0).unwrap().transitions, vec![(0, 0, 0), (0, 0, 1), (0, 0, 2)]);
        let big = perturb(&line(3, vec![(0, 0, 1), (2, 1, 2)]), 5.0).unwrap();
        assert_eq!(big.transitions.len(), 6);
        assert!(perturb(&s, -1.0).is_err());
    }

    #[test]
    fn reflexive_at_zero() {
        let s = line(3, vec![(0, 0, 1), (1, 0, 2), (2, 1, 0)]);
        match check_ad_sim(&s, &s, 0.0, LabelMode::Strict).unwrap() {
            SimOutcome::Simulates(r) => assert_eq!(r.pairs, vec![(0, 0), (1, 1), (2, 2)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failure_reports_counterexample() {
        let s = line(2, vec![(0, 0, 1)]);
        let t = line(2, vec![]);
        match check_ad_sim(&s, &t, 0.0, LabelMode::Permissive).unwrap() {
            SimOutcome::Fails(c) => {
                assert_eq!(c.state, 0);
                assert_eq!(c.trace, vec![Deletion { pair: (0, 0), label: "a".into(), target: 1 }]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_labels_can_fail_where_permissive_succeeds() {
        let s = line(1, vec![(0, 0, 0)]);
        let t = line(1, vec![(0, 1, 0)]);
        assert!(check_ad_sim(&s, &t, 0.0, LabelMode::Permissive).unwrap().holds());
        assert!(!check_ad_sim(&s, &t, 0.0, LabelMode::Strict).unwrap().holds());
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..150 {
            let (ns, nt) = (rng.random_range(1..=3), rng.random_range(1..=3));
            let (ls, lt) = (rng.random_range(1..=2), rng.random_range(1..=2));
            let s = random_system(&mut rng, ns, ls);
            let t = random_system(&mut rng, nt, lt);
            let delta = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];
            for mode in [LabelMode::Permissive, LabelMode::Strict] {
                let (rel, _) = greatest_relation(&s, &t, delta, mode).unwrap();
                let (exists, union) = brute_force_ad_sim(&s, &t, delta, mode).unwrap();
                assert_eq!(rel, union);
                assert_eq!(check_ad_sim(&s, &t, delta, mode).unwrap().holds(), exists);
            }
        }
    }

    #[test]
    fn returned_relations_are_sound_and_maximal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = random_system(&mut rng, 5, 2);
            let t = random_system(&mut rng, 5, 2);
            let delta = rng.random_range(0.0..2.0);
            let (rel, trace) = greatest_relation(&s, &t, delta, LabelMode::Permissive).unwrap();
            assert!(trace.len() <= s.len() * t.len());
            if let SimOutcome::Simulates(r) = check_ad_sim(&s, &t, delta, LabelMode::Permissive).unwrap() {
                assert!(satisfies_conditions(&s, &t, delta, LabelMode::Permissive, &r.pairs).unwrap());
            }
            for d in trace.iter().take(10) {
                let mut more = rel.clone();
                more[d.pair.0][d.pair.1] = true;
                assert!(!relation_ok(&s, &t, delta, LabelMode::Permissive, &more, false));
            }
        }
    }

    #[test]
    fn json_and_dot() {
        let s = FiniteTransitionSystem::new(vec![vec![0.1, 1.0 / 3.0], vec![2.0, -0.5]], vec!["u\"1".into()], vec![(1, 0, 0), (0, 0, 1), (0, 0, 1)])
            .unwrap();
        assert_eq!(s.transitions.len(), 2);
        let back = FiniteTransitionSystem::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let dot = s.to_dot("s");
        assert!(dot.contains("0 -> 1 [label=\"u\\\"1\"]"));
        assert!(FiniteTransitionSystem::from_json(r#"{"states":[[0]],"labels":["a"],"transitions":[[0,0,1]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn perturbation_is_monotone(seed in 0u64..500, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_system(&mut rng, 5, 2);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let a: BTreeSet<_> = perturb(&s, lo).unwrap().transitions.into_iter().collect();
            let b: BTreeSet<_> = perturb(&s, hi).unwrap().transitions.into_iter().collect();
            let orig: BTreeSet<_> = s.transitions.iter().copied().collect();
            prop_assert!(orig.is_subset(&a));
            prop_assert!(a.is_subset(&b));
        }
    }
}
