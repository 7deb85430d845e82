//! Layered ReLU networks and the lowering of lattice networks onto them.
//!
//! Each gadget stage halves every tuple of values still being reduced:
//! a pair `(a, b)` becomes four rectifiers
//! `p = ρ(a+b)`, `q = ρ(−a−b)`, `r = ρ(a−b)`, `s = ρ(b−a)` with
//! `max(a, b) = ½(p−q) + ½(r+s)` and `min(a, b) = ½(p−q) − ½(r+s)`, and a
//! lone value `t` is carried as `ρ(t) − ρ(−t)`. The read-out of one stage is
//! folded into the weights of the next, and the affine functions themselves
//! into the first.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TllNetwork;
use crate::{Error, Result};

/// Row-compressed weight matrix plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLayer {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SparseLayer {
    fn validate(&self) -> Result<()> {
        let nnz = self.values.len();
        let ok = self.row_ptr.len() == self.rows + 1
            && self.row_ptr.first() == Some(&0)
            && self.row_ptr.last() == Some(&nnz)
            && self.row_ptr.windows(2).all(|w| w[0] <= w[1])
            && self.col_idx.len() == nnz
            && self.col_idx.iter().all(|&c| c < self.cols)
            && self.bias.len() == self.rows;
        if !ok {
            return Err(Error::InvalidInput("malformed sparse layer".into()));
        }
        if self.values.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer weight".into()));
        }
        Ok(())
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.rows).map(|r| {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            self.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&c, w)| w * x[c]).sum::<f64>() + self.bias[r]
        }));
    }

    /// Dense row-major copy of the weights.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.col_idx[k]] += self.values[k];
            }
        }
        d
    }
}

/// Layers applied in order; a rectifier follows every layer but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    pub layers: Vec<SparseLayer>,
}

/// Sizes of a lattice network and of its ReLU lowering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    /// Affine functions per output coordinate (largest over outputs).
    pub num_linear_fns: usize,
    /// Selector groups per output coordinate (largest over outputs).
    pub num_selector_groups: usize,
    /// `[n, h₁, …, h_k, m]`.
    pub relu_layer_widths: Vec<usize>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<SparseLayer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("network without layers".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        if self.layers.windows(2).any(|w| w[0].rows != w[1].cols) {
            return Err(Error::InvalidInput("layer dimensions do not compose".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.rows)).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "point dimension");
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    /// Plain-text dump of all layers, see the header it writes.
    pub fn to_weights_text(&self) -> String {
        let mut s = String::new();
        let widths: Vec<String> = self.widths().iter().map(usize::to_string).collect();
        s.push_str("# ReLU network weights\n");
        s.push_str(&format!("# widths {}\n", widths.join(" ")));
        s.push_str("# per layer: `layer <index> <rows> <cols> <nnz>`, then <nnz> lines `<row> <col> <weight>`,\n");
        s.push_str("# then <rows> lines `<bias>`. Indices are zero-based; a ReLU follows every layer but the last.\n");
        for (li, l) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "layer {li} {} {} {}", l.rows, l.cols, l.values.len());
            for r in 0..l.rows {
                for k in l.row_ptr[r]..l.row_ptr[r + 1] {
                    let _ = writeln!(s, "{r} {} {:?}", l.col_idx[k], l.values[k]);
                }
            }
            for b in &l.bias {
                let _ = writeln!(s, "{b:?}");
            }
        }
        s
    }

    pub fn from_weights_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("weights file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut layers = Vec::new();
        while let Some(head) = lines.next() {
            let h: Vec<&str> = head.split_whitespace().collect();
            if h.len() != 5 || h[0] != "layer" {
                return Err(bad("expected layer header"));
            }
            let num = |t: &str| t.parse::<usize>().map_err(|_| bad("integer"));
            let (rows, cols, nnz) = (num(h[2])?, num(h[3])?, num(h[4])?);
            let mut row_ptr = vec![0; rows + 1];
            let mut col_idx = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            let mut last_row = 0;
            for _ in 0..nnz {
                let e: Vec<&str> = lines.next().ok_or_else(|| bad("truncated"))?.split_whitespace().collect();
                if e.len() != 3 {
                    return Err(bad("expected `row col weight`"));
                }
                let r = num(e[0])?;
                if r < last_row || r >= rows {
                    return Err(bad("rows out of order"));
                }
                last_row = r;
                row_ptr[r + 1] += 1;
                col_idx.push(num(e[1])?);
                values.push(e[2].parse::<f64>().map_err(|_| bad("weight"))?);
            }
            for r in 0..rows {
                row_ptr[r + 1] += row_ptr[r];
            }
            let bias = (0..rows)
                .map(|_| lines.next().ok_or_else(|| bad("truncated"))?.trim().parse::<f64>().map_err(|_| bad("bias")))
                .collect::<Result<Vec<_>>>()?;
            layers.push(SparseLayer { rows, cols, row_ptr, col_idx, values, bias });
        }
        Self::new(layers)
    }
}

impl crate::Controller for ReluNetwork {
    fn control(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x)
    }
}

/// Sparse affine expression over the units of the previous layer.
#[derive(Debug, Clone)]
struct Expr {
    terms: Vec<(usize, f64)>,
    bias: f64,
}

impl Expr {
    fn lin(&self, ca: f64, other: &Expr, cb: f64) -> Expr {
        let (a, b) = (&self.terms, &other.terms);
        let mut terms = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let t = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                i += 1;
                (a[i - 1].0, ca * a[i - 1].1)
            } else if i >= a.len() || b[j].0 < a[i].0 {
                j += 1;
                (b[j - 1].0, cb * b[j - 1].1)
            } else {
                i += 1;
                j += 1;
                (a[i - 1].0, ca * a[i - 1].1 + cb * b[j - 1].1)
            };
            if t.1 != 0.0 {
                terms.push(t);
            }
        }
        Expr { terms, bias: ca * self.bias + cb * other.bias }
    }

    fn scale(&self, c: f64) -> Expr {
        Expr { terms: self.terms.iter().map(|&(i, v)| (i, c * v)).filter(|t| t.1 != 0.0).collect(), bias: c * self.bias }
    }

    fn units(pairs: &[(usize, f64)]) -> Expr {
        Expr { terms: pairs.to_vec(), bias: 0.0 }
    }
}

enum Phase {
    Max(Vec<Vec<Expr>>),
    Min(Vec<Expr>),
    Done(Expr),
}

impl Phase {
    fn settle(self) -> Phase {
        match self {
            Phase::Max(groups) if groups.iter().all(|g| g.len() == 1) => {
                Phase::Min(groups.into_iter().map(|mut g| g.pop().expect("nonempty")).collect()).settle()
            }
            Phase::Min(mut vals) if vals.len() == 1 => Phase::Done(vals.pop().expect("nonempty")),
            p => p,
        }
    }
}

struct LayerBuilder {
    rows: Vec<Expr>,
}

impl LayerBuilder {
    fn unit(&mut self, e: Expr) -> usize {
        self.rows.push(e);
        self.rows.len() - 1
    }

    fn pass(&mut self, t: &Expr) -> Expr {
        let a = self.unit(t.clone());
        let b = self.unit(t.scale(-1.0));
        Expr::units(&[(a, 1.0), (b, -1.0)])
    }

    fn pair(&mut self, a: &Expr, b: &Expr, sign: f64) -> Expr {
        let p = self.unit(a.lin(1.0, b, 1.0));
        let q = self.unit(a.lin(-1.0, b, -1.0));
        let r = self.unit(a.lin(1.0, b, -1.0));
        let s = self.unit(a.lin(-1.0, b, 1.0));
        Expr::units(&[(p, 0.5), (q, -0.5), (r, 0.5 * sign), (s, 0.5 * sign)])
    }

    fn reduce(&mut self, vals: &[Expr], sign: f64) -> Vec<Expr> {
        vals.chunks(2)
            .map(|c| match c {
                [a, b] => self.pair(a, b, sign),
                [t] => self.pass(t),
                _ => unreachable!(),
            })
            .collect()
    }

    fn finish(self, cols: usize) -> SparseLayer {
        let mut layer = SparseLayer {
            rows: self.rows.len(),
            cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
            bias: Vec::new(),
        };
        for e in self.rows {
            for (c, v) in e.terms {
                layer.col_idx.push(c);
                layer.values.push(v);
            }
            layer.row_ptr.push(layer.col_idx.len());
            layer.bias.push(e.bias);
        }
        layer
    }
}

fn ceil_log2(s: usize) -> usize {
    (usize::BITS - s.saturating_sub(1).leading_zeros()) as usize
}

/// Lower a lattice network onto rectifier layers computing the same
/// function. Outputs that finish their reductions early are carried through
/// the remaining stages.
pub fn lower_to_relu(net: &TllNetwork) -> ReluNetwork {
    let stages = net
        .outputs
        .iter()
        .map(|o| ceil_log2(o.groups.iter().map(Vec::len).max().unwrap_or(1)) + ceil_log2(o.groups.len()))
        .max()
        .unwrap_or(0);
    let mut phases: Vec<Phase> = net
        .outputs
        .iter()
        .map(|o| {
            let exprs: Vec<Expr> = o
                .linear_fns
                .iter()
                .map(|f| Expr {
                    terms: f.w.iter().copied().enumerate().filter(|t| t.1 != 0.0).collect(),
                    bias: f.b,
                })
                .collect();
            Phase::Max(o.groups.iter().map(|g| g.iter().map(|&i| exprs[i].clone()).collect()).collect()).settle()
        })
        .collect();
    let mut layers = Vec::with_capacity(stages + 1);
    let mut cols = net.n;
    for _ in 0..stages {
        let mut b = LayerBuilder { rows: Vec::new() };
        phases = phases
            .into_iter()
            .map(|p| {
                match p {
                    Phase::Max(groups) => Phase::Max(groups.iter().map(|g| b.reduce(g, 1.0)).collect()),
                    Phase::Min(vals) => Phase::Min(b.reduce(&vals, -1.0)),
                    Phase::Done(e) => Phase::Done(b.pass(&e)),
                }
                .settle()
            })
            .collect();
        let layer = b.finish(cols);
        cols = layer.rows;
        layers.push(layer);
    }
    let mut out = LayerBuilder { rows: Vec::new() };
    for p in phases {
        match p {
            Phase::Done(e) => {
                out.unit(e);
            }
            _ => unreachable!("every output is reduced after the last stage"),
        }
    }
    layers.push(out.finish(cols));
    ReluNetwork { layers }
}

fn checked_stage_width(groups: usize, size: usize) -> Option<usize> {
    groups.checked_mul((size / 2).checked_mul(4)?.checked_add(2 * (size % 2))?)
}

/// Widths of the gadget stages for one output with the given group sizes.
fn stage_widths(mut sizes: Vec<usize>) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    while sizes.iter().any(|&s| s > 1) {
        let mut w = 0usize;
        for s in &mut sizes {
            w = w.checked_add(checked_stage_width(1, *s)?)?;
            *s = s.div_ceil(2);
        }
        out.push(w);
    }
    let mut m = sizes.len();
    while m > 1 {
        out.push(checked_stage_width(1, m)?);
        m = m.div_ceil(2);
    }
    Some(out)
}

fn combine_outputs(n: usize, per_output: Vec<Vec<usize>>) -> Option<Vec<usize>> {
    let depth = per_output.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![n];
    for k in 0..depth {
        let mut w = 0usize;
        for o in &per_output {
            w = w.checked_add(o.get(k).copied().unwrap_or(2))?;
        }
        widths.push(w);
    }
    widths.push(per_output.len());
    Some(widths)
}

impl TllNetwork {
    /// Descriptor of this network and of its lowering.
    pub fn arch(&self) -> ArchDescriptor {
        let per_output = self
            .outputs
            .iter()
            .map(|o| stage_widths(o.groups.iter().map(Vec::len).collect()).expect("widths of an existing network fit"))
            .collect();
        ArchDescriptor {
            num_linear_fns: self.num_linear_fns(),
            num_selector_groups: self.num_selector_groups(),
            relu_layer_widths: combine_outputs(self.n, per_output).expect("widths fit"),
        }
    }
}

/// Worst-case architecture for a CPWA with at most `n_regions` affine
/// regions summed over the `m` outputs: each output gets `⌈N/m⌉` affine
/// functions and as many selector groups, each selecting all of them.
pub fn arch_of_bound(n_regions: u64, n: usize, m: usize) -> Result<ArchDescriptor> {
    if n_regions == 0 || n == 0 || m == 0 {
        return Err(Error::InvalidInput("arch_of_bound needs N, n, m ≥ 1".into()));
    }
    let overflow = || Error::Overflow(format!("layer widths for N = {n_regions}"));
    let per = usize::try_from(n_regions.div_ceil(m as u64)).map_err(|_| overflow())?;
    let mut widths = vec![n];
    let mut size = per;
    while size > 1 {
        let w = checked_stage_width(per, size).and_then(|w| w.checked_mul(m)).ok_or_else(overflow)?;
        widths.push(w);
        size = size.div_ceil(2);
    }
    let mut groups = per;
    while groups > 1 {
        widths.push(checked_stage_width(1, groups).and_then(|w| w.checked_mul(m)).ok_or_else(overflow)?);
        groups = groups.div_ceil(2);
    }
    widths.push(m);
    Ok(ArchDescriptor { num_linear_fns: per, num_selector_groups: per, relu_layer_widths: widths })
}
