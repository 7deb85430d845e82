//! Lattice realization of a continuous piecewise-affine function given by
//! its pieces.
//!
//! For a region `R` on which `f = ℓ_s`, the candidate group
//! `T = { i : ℓ_i ≤ ℓ_s on R }` has `max_T ℓ_i = f` on `R`. It is also `≥ f`
//! everywhere once the order of every `ℓ_i` against `ℓ_s` is fixed on `R`,
//! which a grid piece does not guarantee. In the plane we therefore track
//! the polygons where a group falls below `f`. A piece whose full `T` still
//! leaves some is cut along `ℓ_c = ℓ_s` for a map `ℓ_c` covering them, and
//! the parts are handled separately. Groups are shrunk greedily: starting
//! from `{s}`, add the member of `T` that covers most of the remaining
//! violation area until none is left.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::polygon::{self, Point};
use super::{Affine, ScalarTll, TllNetwork};
use crate::cpwa::Piece;
use crate::{Error, Exec, Result};

const DEDUP_TOL: f64 = 1e-12;
const ORDER_TOL: f64 = 1e-9;
const AREA_EPS: f64 = 1e-18;
const VERIFY_TOL: f64 = 1e-8;
const TOP_VIOLATIONS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FromPiecesOptions {
    /// Shrink selector groups (one- and two-dimensional inputs only).
    pub prune: bool,
    /// Points sampled inside the pieces to check the result.
    pub verify_samples: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for FromPiecesOptions {
    fn default() -> Self {
        Self { prune: true, verify_samples: 10_000, seed: 0, exec: Exec::default() }
    }
}

struct Planar {
    polys: Vec<Vec<Point>>,
    fns: Vec<[f64; 3]>,
}

impl Planar {
    fn new(pieces: &[Piece], fns: &[Affine]) -> Self {
        let polys = pieces
            .iter()
            .map(|p| {
                if p.vertices[0].len() == 1 {
                    let (a, b) = (p.vertices[0][0], p.vertices[p.vertices.len() - 1][0]);
                    vec![[a, 0.0], [b, 0.0], [b, 1.0], [a, 1.0]]
                } else {
                    p.vertices.iter().map(|v| [v[0], v[1]]).collect()
                }
            })
            .collect();
        let fns = fns
            .iter()
            .map(|f| [f.w[0], f.w.get(1).copied().unwrap_or(0.0), f.b])
            .collect();
        Self { polys, fns }
    }

    #[inline]
    fn eval(&self, i: usize, p: Point) -> f64 {
        let f = self.fns[i];
        f[0] * p[0] + f[1] * p[1] + f[2]
    }

    /// Part of `poly` where `ℓ_target − ℓ_i ≥ ORDER_TOL`.
    fn below(&self, poly: &[Point], target: usize, i: usize) -> Vec<Point> {
        let (t, f) = (self.fns[target], self.fns[i]);
        polygon::clip(poly, [t[0] - f[0], t[1] - f[1]], t[2] - f[2] - ORDER_TOL)
    }
}

type Violations = Vec<(usize, Vec<Point>)>;

/// Pieces (by index) and the parts of them where `max_group < f`.
fn violations_of(planar: &Planar, sigma: &[usize], start: usize) -> Violations {
    planar
        .polys
        .iter()
        .enumerate()
        .filter(|&(k, poly)| poly.iter().any(|&p| planar.eval(sigma[k], p) > planar.eval(start, p)))
        .filter_map(|(k, poly)| {
            let v = planar.below(poly, sigma[k], start);
            (polygon::area(&v) > AREA_EPS).then_some((k, v))
        })
        .collect()
}

fn restrict(planar: &Planar, sigma: &[usize], violations: Violations, c: usize) -> Violations {
    violations
        .into_iter()
        .filter_map(|(k, v)| {
            let v = planar.below(&v, sigma[k], c);
            (polygon::area(&v) > AREA_EPS).then_some((k, v))
        })
        .collect()
}

/// Sample points of the largest violations with their owner and area.
fn probes(sigma: &[usize], violations: &Violations) -> Vec<(usize, f64, Vec<Point>)> {
    let areas: Vec<f64> = violations.iter().map(|(_, v)| polygon::area(v)).collect();
    let mut order: Vec<usize> = (0..violations.len()).collect();
    if order.len() > TOP_VIOLATIONS {
        order.select_nth_unstable_by(TOP_VIOLATIONS, |&a, &b| areas[b].total_cmp(&areas[a]));
        order.truncate(TOP_VIOLATIONS);
    }
    order
        .iter()
        .map(|&o| {
            let (k, v) = &violations[o];
            let mut pts = v.clone();
            pts.push(polygon::centroid(v));
            (sigma[*k], areas[o], pts)
        })
        .collect()
}

/// Pick the admissible function covering most of the probed violation
/// area. Owners of the probes are tried before the full pool.
fn best_cover(
    planar: &Planar,
    probes: &[(usize, f64, Vec<Point>)],
    admissible: impl Fn(usize) -> bool,
    pool: impl Iterator<Item = usize>,
) -> Option<usize> {
    let score = |c: usize| -> f64 {
        probes
            .iter()
            .map(|(target, a, pts)| {
                let hit = pts.iter().filter(|&&p| planar.eval(c, p) >= planar.eval(*target, p) - ORDER_TOL).count();
                a * hit as f64 / pts.len() as f64
            })
            .sum()
    };
    let best_of = |pool: &mut dyn Iterator<Item = usize>| {
        pool.filter(|&c| admissible(c))
            .map(|c| (c, score(c)))
            .filter(|b| b.1 > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|b| b.0)
    };
    let mut owners: Vec<usize> = probes.iter().map(|p| p.0).collect();
    owners.sort_unstable();
    owners.dedup();
    best_of(&mut owners.into_iter()).or_else(|| best_of(&mut pool.into_iter()))
}

/// A subset of `candidates` containing `start` whose max is `≥ f`
/// everywhere, or the violations left by all of `candidates`.
fn select_group(
    planar: &Planar,
    sigma: &[usize],
    start: usize,
    candidates: &[usize],
    prune: bool,
) -> std::result::Result<Vec<usize>, Violations> {
    let mut violations = violations_of(planar, sigma, start);
    if !prune {
        for &c in candidates {
            if violations.is_empty() {
                break;
            }
            violations = restrict(planar, sigma, violations, c);
        }
        return if violations.is_empty() { Ok(candidates.to_vec()) } else { Err(violations) };
    }
    let mut group = vec![start];
    let mut available = vec![false; planar.fns.len()];
    candidates.iter().for_each(|&c| available[c] = true);
    available[start] = false;
    while !violations.is_empty() {
        let probes = probes(sigma, &violations);
        let Some(c) = best_cover(planar, &probes, |c| available[c], candidates.iter().copied()) else {
            // nothing in the pool helps, so the whole pool leaves these
            return Err(candidates.iter().fold(violations, |v, &c| restrict(planar, sigma, v, c)));
        };
        available[c] = false;
        group.push(c);
        violations = restrict(planar, sigma, violations, c);
    }
    group.sort_unstable();
    Ok(group)
}

fn dedup_fns(pieces: &[Piece], output: usize) -> (Vec<Affine>, Vec<usize>) {
    let mut fns: Vec<Affine> = Vec::new();
    // buckets of width DEDUP_TOL on the bias; matches sit in adjacent ones
    let mut buckets: HashMap<i64, Vec<usize>> = HashMap::new();
    let sigma = pieces
        .iter()
        .map(|p| {
            let f = Affine::new(p.weights[output].clone(), p.bias[output]);
            let key = (f.b / DEDUP_TOL).floor() as i64;
            let hit = (key - 1..=key + 1)
                .filter_map(|k| buckets.get(&k))
                .flatten()
                .copied()
                .filter(|&i| fns[i].approx_eq(&f, DEDUP_TOL))
                .min();
            hit.unwrap_or_else(|| {
                buckets.entry(key).or_default().push(fns.len());
                fns.push(f);
                fns.len() - 1
            })
        })
        .collect();
    (fns, sigma)
}

fn drop_supersets(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    groups.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    groups.dedup();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for g in groups {
        let is_superset = kept.iter().any(|k| k.iter().all(|i| g.binary_search(i).is_ok()));
        if !is_superset {
            kept.push(g);
        }
    }
    kept.sort();
    kept
}

fn scalar_from_pieces(pieces: &[Piece], output: usize, opts: &FromPiecesOptions) -> Result<ScalarTll> {
    let (fns, sigma) = dedup_fns(pieces, output);
    let n = pieces[0].vertices[0].len();
    if n > 2 {
        let below_sets = opts.exec.map(pieces.len(), |j| {
            let own = &fns[sigma[j]];
            (0..fns.len())
                .filter(|&i| pieces[j].vertices.iter().all(|v| fns[i].eval(v) <= own.eval(v) + ORDER_TOL))
                .collect()
        });
        return Ok(ScalarTll { linear_fns: fns, groups: drop_supersets(below_sets) });
    }
    let planar = Planar::new(pieces, &fns);
    let below = |poly: &[Point], own: usize| -> Vec<usize> {
        (0..fns.len())
            .filter(|&i| poly.iter().all(|&p| planar.eval(i, p) <= planar.eval(own, p) + ORDER_TOL))
            .collect()
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    // groups by member; a valid group that stays below f on a region
    // attains f there, so it must contain the region's own map
    let mut by_member: Vec<Vec<usize>> = vec![Vec::new(); fns.len()];
    let max_splits = 4 * fns.len() + 16;
    for j in 0..pieces.len() {
        let own = sigma[j];
        let mut regions = vec![planar.polys[j].clone()];
        let mut splits = 0;
        while let Some(q) = regions.pop() {
            let covered = by_member[own].iter().any(|&g| {
                groups[g].iter().all(|&i| q.iter().all(|&p| planar.eval(i, p) <= planar.eval(own, p) + ORDER_TOL))
            });
            if covered {
                continue;
            }
            let cands = below(&q, own);
            match select_group(&planar, &sigma, own, &cands, opts.prune) {
                Ok(group) => {
                    group.iter().for_each(|&i| by_member[i].push(groups.len()));
                    groups.push(group);
                }
                Err(violations) => {
                    // the ordering against `own` changes inside q: cut q
                    // where a covering map crosses it
                    let (t, lo) = (planar.fns[own], ORDER_TOL);
                    let crosses = |c: usize| q.iter().any(|&p| planar.eval(c, p) < planar.eval(own, p) - lo);
                    let cut = best_cover(&planar, &probes(&sigma, &violations), crosses, 0..fns.len());
                    splits += 1;
                    let (Some(c), true) = (cut, splits <= max_splits) else {
                        let (k, v) = &violations[0];
                        let x = polygon::centroid(v);
                        return Err(Error::Inconsistent {
                            gap: planar.eval(sigma[*k], x) - planar.eval(own, x),
                            point: x[..n].to_vec(),
                        });
                    };
                    let f = planar.fns[c];
                    let d = [t[0] - f[0], t[1] - f[1]];
                    for part in [polygon::clip(&q, d, t[2] - f[2]), polygon::clip(&q, [-d[0], -d[1]], f[2] - t[2])] {
                        if polygon::area(&part) > AREA_EPS {
                            regions.push(part);
                        }
                    }
                }
            }
        }
    }
    Ok(ScalarTll { linear_fns: fns, groups: drop_supersets(groups) })
}

fn sample_in_piece(piece: &Piece, seed: u64, s: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let w: Vec<f64> = piece.vertices.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    let n = piece.vertices[0].len();
    (0..n)
        .map(|k| piece.vertices.iter().zip(&w).map(|(v, wi)| v[k] * wi).sum::<f64>() / total)
        .collect()
}

impl TllNetwork {
    /// Realize the continuous piecewise-affine function described by
    /// `pieces` (convex, covering a convex domain) as a lattice network.
    pub fn from_pieces(pieces: &[Piece], opts: &FromPiecesOptions) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::InvalidInput("no pieces".into()))?;
        let n = first.vertices.first().map_or(0, Vec::len);
        let m = first.bias.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("pieces need vertices and outputs".into()));
        }
        for p in pieces {
            if p.vertices.len() < 2 || p.vertices.iter().any(|v| v.len() != n) {
                return Err(Error::InvalidInput("piece vertices".into()));
            }
            if p.bias.len() != m || p.weights.len() != m || p.weights.iter().any(|w| w.len() != n) {
                return Err(Error::InvalidInput("piece affine map dimensions".into()));
            }
        }
        let outputs = (0..m).map(|o| scalar_from_pieces(pieces, o, opts)).collect::<Result<Vec<_>>>()?;
        let net = TllNetwork::new(n, outputs)?;

        let errs = opts.exec.map(opts.verify_samples, |s| {
            let piece = &pieces[s % pieces.len()];
            let x = sample_in_piece(piece, opts.seed, s);
            let u = net.eval(&x);
            let gap = (0..m).map(|o| (u[o] - piece.eval_output(o, &x)).abs()).fold(0.0, f64::max);
            (gap, x)
        });
        if let Some((gap, x)) = errs.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
            if gap > VERIFY_TOL || gap.is_nan() {
                return Err(Error::Inconsistent { gap, point: x });
            }
        }
        log::debug!(
            "lattice: {} affine maps, {} groups (largest output)",
            net.num_linear_fns(),
            net.num_selector_groups()
        );
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpwa::{GridCpwa, Partition};
    use crate::sampling::Halton;
    use crate::Hyperbox;

    fn interval(a: f64, b: f64, w: f64, c: f64) -> Piece {
        Piece { vertices: vec![vec![a], vec![b]], weights: vec![vec![w]], bias: vec![c] }
    }

    fn brute(net: &TllNetwork, f: impl Fn(f64) -> f64) -> f64 {
        (0..1000)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 999.0;
                (net.eval(&[x])[0] - f(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_piece() {
        let net = TllNetwork::from_pieces(&[interval(-1.0, 1.0, 2.0, 1.0)], &FromPiecesOptions::default()).unwrap();
        assert_eq!(net.num_linear_fns(), 1);
        assert_eq!(net.outputs[0].groups, vec![vec![0]]);
    }

    #[test]
    fn min_of_two() {
        // l1 = x, l2 = -x + 0.5, crossing at 0.25
        let pieces = [interval(-1.0, 0.25, 1.0, 0.0), interval(0.25, 1.0, -1.0, 0.5)];
        for prune in [true, false] {
            let opts = FromPiecesOptions { prune, ..Default::default() };
            let net = TllNetwork::from_pieces(&pieces, &opts).unwrap();
            assert_eq!(net.outputs[0].groups, vec![vec![0], vec![1]]);
            assert!(brute(&net, |x| x.min(0.5 - x)) < 1e-12);
        }
    }

    #[test]
    fn max_of_two() {
        let pieces = [interval(-1.0, 0.25, -1.0, 0.5), interval(0.25, 1.0, 1.0, 0.0)];
        for prune in [true, false] {
            let opts = FromPiecesOptions { prune, ..Default::default() };
            let net = TllNetwork::from_pieces(&pieces, &opts).unwrap();
            assert_eq!(net.outputs[0].groups, vec![vec![0, 1]]);
            assert!(brute(&net, |x| x.max(0.5 - x)) < 1e-12);
        }
    }

    #[test]
    fn discontinuous_input_is_inconsistent() {
        let pieces = [interval(-1.0, 0.0, 0.0, 0.0), interval(0.0, 1.0, 0.0, 1.0)];
        let err = TllNetwork::from_pieces(&pieces, &FromPiecesOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent { .. }));
    }

    #[test]
    fn superset_removal() {
        let g = drop_supersets(vec![vec![0, 1, 2], vec![1], vec![1], vec![0, 2], vec![1, 3]]);
        assert_eq!(g, vec![vec![0, 2], vec![1]]);
    }

    fn grid_net(eta: f64, prune: bool) -> (GridCpwa, TllNetwork) {
        let oracle = |x: &[f64]| vec![(3.0 * x[0]).sin() * x[1] + 0.5 * x[0], (x[0] * x[1]).cos()];
        let p = Partition::new(Hyperbox::cube(2, -1.0, 1.0).unwrap(), eta, 0.5).unwrap();
        let (c, _) = GridCpwa::build(&oracle, p, None).unwrap();
        let opts = FromPiecesOptions { prune, ..Default::default() };
        let net = TllNetwork::from_pieces(&c.enumerate_pieces().unwrap(), &opts).unwrap();
        (c, net)
    }

    #[test]
    fn lattice_matches_grid_cpwa() {
        for prune in [true, false] {
            let (c, net) = grid_net(0.4, prune);
            let dom = c.partition().domain.clone();
            let seq = Halton::new(2, 11);
            let gap = (0..20_000)
                .map(|i| {
                    let x = seq.point(&dom, i);
                    crate::sup_dist(&net.eval(&x), &c.eval(&x))
                })
                .fold(0.0, f64::max);
            assert!(gap <= 1e-8, "prune={prune} gap={gap}");
        }
    }

    #[test]
    fn pruning_shrinks_groups() {
        let (_, full) = grid_net(0.4, false);
        let (_, pruned) = grid_net(0.4, true);
        let size = |n: &TllNetwork| n.outputs.iter().flat_map(|o| &o.groups).map(Vec::len).sum::<usize>();
        assert!(size(&pruned) < size(&full));
    }

    #[test]
    fn grid_centers_give_plateau_values() {
        let (c, net) = grid_net(0.3, true);
        let p = c.partition();
        for f in 0..p.center_count() {
            let idx = p.unflatten(f);
            let u = net.eval(&p.center(&idx));
            for (a, b) in u.iter().zip(c.center_value(&idx)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn plateau_pieces_are_cut_when_their_group_falls_short() {
        // thin plateaus with rough center values: a whole plateau's T misses
        // the gap maps that leave it through a corner
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let domain = Hyperbox::new(vec![-1.0, -0.5], vec![1.0, 1.5]).unwrap();
        for (rho, prune) in [(0.2, true), (0.25, false), (0.7, true)] {
            let p = Partition::new(domain.clone(), 0.3, rho).unwrap();
            let values = (0..p.center_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c = GridCpwa::from_values(p, 1, values).unwrap();
            let opts = FromPiecesOptions { prune, ..Default::default() };
            let net = TllNetwork::from_pieces(&c.enumerate_pieces().unwrap(), &opts).unwrap();
            let seq = Halton::new(2, 5);
            let gap = (0..20_000)
                .map(|i| {
                    let x = seq.point(&domain, i);
                    crate::sup_dist(&net.eval(&x), &c.eval(&x))
                })
                .fold(0.0, f64::max);
            assert!(gap <= 1e-8, "rho={rho} prune={prune} gap={gap}");
        }
    }
}
