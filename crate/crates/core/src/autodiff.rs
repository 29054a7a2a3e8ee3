//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] is rebuilt per forward pass (define-by-run): every operation
//! records its inputs, computes its value eagerly, and stores the data its
//! backward rule needs. Graph operators enter the tape through
//! [`Tape::sparse_apply`], whose backward rule applies the operator's
//! transpose, so the engine never materializes an n x n matrix.
//!
//! Scalars are 1x1 matrices. Gradients accumulate additively across fan-out.
//! Shape mismatches are programmer errors and panic; contract violations a
//! caller can hit (non-scalar backward root) are `Result`s.

use crate::graph::{Graph, GraphOp};
use ndarray::{concatenate, Array2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("backward root must be a scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("variable {0} does not exist on this tape")]
    UnknownVar(usize),
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

enum Payload<'g> {
    Input,
    Matmul { a: VarId, b: VarId },
    AddRowBias { x: VarId, b: VarId },
    Add { a: VarId, b: VarId },
    Sub { a: VarId, b: VarId },
    Mul { a: VarId, b: VarId },
    Scale { x: VarId, factor: f64 },
    Relu { x: VarId },
    LeakyRelu { x: VarId, slope: f64 },
    ConcatCols { a: VarId, b: VarId, split: usize },
    SliceCol { x: VarId, col: usize },
    ColScale { x: VarId, s: VarId },
    SoftmaxRows { x: VarId },
    MinMax { x: VarId, lo: usize, hi: usize, degenerate: bool },
    Sum { x: VarId },
    SparseApply { x: VarId, op: GraphOp, graph: &'g Graph },
    QuadFormLoss { p: VarId, graph: &'g Graph, beta: f64 },
}

struct Node<'g> {
    value: Array2<f64>,
    payload: Payload<'g>,
    requires: bool,
}

/// Define-by-run recording of one forward computation.
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
    grads: Vec<Option<Array2<f64>>>,
}

impl<'g> Default for Tape<'g> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, payload: Payload<'g>, requires: bool) -> VarId {
        self.nodes.push(Node {
            value,
            payload,
            requires,
        });
        self.grads.push(None);
        VarId(self.nodes.len() - 1)
    }

    fn req(&self, v: VarId) -> bool {
        self.nodes[v.0].requires
    }

    pub fn value(&self, v: VarId) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated for `v` by the last [`Tape::backward`] call;
    /// zeros when no path from the root reaches `v`.
    pub fn grad(&self, v: VarId) -> Array2<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.nodes[v.0].value.raw_dim()),
        }
    }

    pub fn input(&mut self, value: Array2<f64>, requires_grad: bool) -> VarId {
        self.push(value, Payload::Input, requires_grad)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> VarId {
        self.input(value, false)
    }

    pub fn scalar(&mut self, value: f64) -> VarId {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.ncols(), bv.nrows(), "matmul inner dimensions differ");
        let value = av.dot(bv);
        let requires = self.req(a) || self.req(b);
        self.push(value, Payload::Matmul { a, b }, requires)
    }

    /// Row-broadcast bias add: `x` is n x c, `bias` is 1 x c.
    pub fn add_row_bias(&mut self, x: VarId, bias: VarId) -> VarId {
        let (xv, bv) = (&self.nodes[x.0].value, &self.nodes[bias.0].value);
        assert_eq!(bv.nrows(), 1, "bias must be a row vector");
        assert_eq!(xv.ncols(), bv.ncols(), "bias width must match");
        let value = xv + bv;
        let requires = self.req(x) || self.req(bias);
        self.push(value, Payload::AddRowBias { x, b: bias }, requires)
    }

    /// `x W + b` as one call.
    pub fn affine(&mut self, x: VarId, w: VarId, bias: VarId) -> VarId {
        let y = self.matmul(x, w);
        self.add_row_bias(y, bias)
    }

    /// Per-row dot product with a column vector: `x` n x k, `a` k x 1.
    pub fn row_dot(&mut self, x: VarId, a: VarId) -> VarId {
        assert_eq!(
            self.nodes[a.0].value.ncols(),
            1,
            "row_dot expects a column vector"
        );
        self.matmul(x, a)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.raw_dim(), bv.raw_dim(), "add shapes differ");
        let value = av + bv;
        let requires = self.req(a) || self.req(b);
        self.push(value, Payload::Add { a, b }, requires)
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.raw_dim(), bv.raw_dim(), "sub shapes differ");
        let value = av - bv;
        let requires = self.req(a) || self.req(b);
        self.push(value, Payload::Sub { a, b }, requires)
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.raw_dim(), bv.raw_dim(), "mul shapes differ");
        let value = av * bv;
        let requires = self.req(a) || self.req(b);
        self.push(value, Payload::Mul { a, b }, requires)
    }

    pub fn scale(&mut self, x: VarId, factor: f64) -> VarId {
        let value = &self.nodes[x.0].value * factor;
        let requires = self.req(x);
        self.push(value, Payload::Scale { x, factor }, requires)
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        let value = self.nodes[x.0].value.mapv(|v| v.max(0.0));
        let requires = self.req(x);
        self.push(value, Payload::Relu { x }, requires)
    }

    pub fn leaky_relu(&mut self, x: VarId, slope: f64) -> VarId {
        let value = self.nodes[x.0].value.mapv(|v| if v > 0.0 { v } else { slope * v });
        let requires = self.req(x);
        self.push(value, Payload::LeakyRelu { x, slope }, requires)
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.nrows(), bv.nrows(), "concat_cols row counts differ");
        let split = av.ncols();
        let value = concatenate(Axis(1), &[av.view(), bv.view()]).expect("concat");
        let requires = self.req(a) || self.req(b);
        self.push(value, Payload::ConcatCols { a, b, split }, requires)
    }

    pub fn slice_col(&mut self, x: VarId, col: usize) -> VarId {
        let xv = &self.nodes[x.0].value;
        assert!(col < xv.ncols(), "column index out of range");
        let value = xv.column(col).to_owned().insert_axis(Axis(1));
        let requires = self.req(x);
        self.push(value, Payload::SliceCol { x, col }, requires)
    }

    /// Scale every column of `x` (n x c) by the column vector `s` (n x 1):
    /// the element-wise product used for per-node attention weighting.
    pub fn col_scale(&mut self, x: VarId, s: VarId) -> VarId {
        let (xv, sv) = (&self.nodes[x.0].value, &self.nodes[s.0].value);
        assert_eq!(sv.ncols(), 1, "col_scale weights must be a column vector");
        assert_eq!(xv.nrows(), sv.nrows(), "col_scale row counts differ");
        let value = xv * sv; // ndarray broadcasts (n,1) across columns
        let requires = self.req(x) || self.req(s);
        self.push(value, Payload::ColScale { x, s }, requires)
    }

    /// Softmax across the columns of each row, with max subtraction.
    pub fn softmax_rows(&mut self, x: VarId) -> VarId {
        let xv = &self.nodes[x.0].value;
        let mut value = xv.clone();
        for mut row in value.rows_mut() {
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - m).exp());
            let s: f64 = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        let requires = self.req(x);
        self.push(value, Payload::SoftmaxRows { x }, requires)
    }

    /// Per-position softmax across a group of n x 1 score vectors,
    /// returning one weight vector per input in the same order.
    pub fn softmax_over_group(&mut self, scores: &[VarId]) -> Vec<VarId> {
        assert!(!scores.is_empty(), "softmax group must be non-empty");
        let mut stacked = scores[0];
        for &s in &scores[1..] {
            stacked = self.concat_cols(stacked, s);
        }
        let soft = self.softmax_rows(stacked);
        (0..scores.len()).map(|j| self.slice_col(soft, j)).collect()
    }

    /// Min-max normalization of a column vector to [0, 1].
    ///
    /// Ties route the gradient to the lowest-index extremum. A constant
    /// input maps to all 0.5 with zero gradient.
    pub fn min_max_normalize(&mut self, x: VarId) -> VarId {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.ncols(), 1, "min_max_normalize expects a column vector");
        let n = xv.nrows();
        let (mut lo, mut hi) = (0usize, 0usize);
        for i in 1..n {
            if xv[(i, 0)] < xv[(lo, 0)] {
                lo = i;
            }
            if xv[(i, 0)] > xv[(hi, 0)] {
                hi = i;
            }
        }
        let range = xv[(hi, 0)] - xv[(lo, 0)];
        let degenerate = range <= 0.0;
        let value = if degenerate {
            Array2::from_elem((n, 1), 0.5)
        } else {
            let min = xv[(lo, 0)];
            xv.mapv(|v| (v - min) / range)
        };
        let requires = self.req(x);
        self.push(
            value,
            Payload::MinMax {
                x,
                lo,
                hi,
                degenerate,
            },
            requires,
        )
    }

    pub fn sum(&mut self, x: VarId) -> VarId {
        let value = Array2::from_elem((1, 1), self.nodes[x.0].value.sum());
        let requires = self.req(x);
        self.push(value, Payload::Sum { x }, requires)
    }

    /// Apply a fixed graph operator to `x`; backward applies its transpose.
    pub fn sparse_apply(&mut self, graph: &'g Graph, op: GraphOp, x: VarId) -> VarId {
        let value = op.apply(graph, &self.nodes[x.0].value);
        let requires = self.req(x);
        self.push(value, Payload::SparseApply { x, op, graph }, requires)
    }

    /// The two-term objective `-p^T W p + beta * p^T Wbar p` as a scalar
    /// tape node, evaluated with the sparse complement identity.
    pub fn quad_form_loss(&mut self, p: VarId, graph: &'g Graph, beta: f64) -> VarId {
        let pv = &self.nodes[p.0].value;
        assert_eq!(pv.ncols(), 1, "quad_form_loss expects a column vector");
        assert_eq!(pv.nrows(), graph.node_count(), "vector length must match graph");
        let slice: Vec<f64> = pv.column(0).to_vec();
        let q = graph.quad_form(&slice);
        let value = Array2::from_elem((1, 1), -q + beta * graph.complement_quad_form(&slice));
        let requires = self.req(p);
        self.push(value, Payload::QuadFormLoss { p, graph, beta }, requires)
    }

    fn accumulate(grads: &mut [Option<Array2<f64>>], v: VarId, contribution: Array2<f64>) {
        match &mut grads[v.0] {
            Some(g) => *g += &contribution,
            slot => *slot = Some(contribution),
        }
    }

    /// Reverse sweep from a scalar root; gradients land in [`Tape::grad`].
    pub fn backward(&mut self, root: VarId) -> Result<(), AutodiffError> {
        if root.0 >= self.nodes.len() {
            return Err(AutodiffError::UnknownVar(root.0));
        }
        let shape = self.nodes[root.0].value.raw_dim();
        if shape != ndarray::Dim((1, 1)) {
            return Err(AutodiffError::NonScalarRoot {
                rows: shape[0],
                cols: shape[1],
            });
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root.0] = Some(Array2::ones((1, 1)));

        for i in (0..=root.0).rev() {
            let Some(gy) = self.grads[i].clone() else {
                continue;
            };
            let mut contributions: Vec<(VarId, Array2<f64>)> = Vec::new();
            {
                let node = &self.nodes[i];
                let mut pass = |v: VarId, g: Array2<f64>| {
                    if self.nodes[v.0].requires {
                        contributions.push((v, g));
                    }
                };
                match &node.payload {
                    Payload::Input => {}
                    Payload::Matmul { a, b } => {
                        let av = &self.nodes[a.0].value;
                        let bv = &self.nodes[b.0].value;
                        pass(*a, gy.dot(&bv.t()));
                        pass(*b, av.t().dot(&gy));
                    }
                    Payload::AddRowBias { x, b } => {
                        pass(*x, gy.clone());
                        pass(*b, gy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    Payload::Add { a, b } => {
                        pass(*a, gy.clone());
                        pass(*b, gy.clone());
                    }
                    Payload::Sub { a, b } => {
                        pass(*a, gy.clone());
                        pass(*b, -&gy);
                    }
                    Payload::Mul { a, b } => {
                        let av = &self.nodes[a.0].value;
                        let bv = &self.nodes[b.0].value;
                        pass(*a, &gy * bv);
                        pass(*b, &gy * av);
                    }
                    Payload::Scale { x, factor } => pass(*x, &gy * *factor),
                    Payload::Relu { x } => {
                        let xv = &self.nodes[x.0].value;
                        let mask = xv.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                        pass(*x, &gy * &mask);
                    }
                    Payload::LeakyRelu { x, slope } => {
                        let xv = &self.nodes[x.0].value;
                        let mask = xv.mapv(|v| if v > 0.0 { 1.0 } else { *slope });
                        pass(*x, &gy * &mask);
                    }
                    Payload::ConcatCols { a, b, split } => {
                        let ga = gy.slice(ndarray::s![.., ..*split]).to_owned();
                        let gb = gy.slice(ndarray::s![.., *split..]).to_owned();
                        pass(*a, ga);
                        pass(*b, gb);
                    }
                    Payload::SliceCol { x, col } => {
                        let xv = &self.nodes[x.0].value;
                        let mut gx = Array2::zeros(xv.raw_dim());
                        gx.column_mut(*col).assign(&gy.column(0));
                        pass(*x, gx);
                    }
                    Payload::ColScale { x, s } => {
                        let xv = &self.nodes[x.0].value;
                        let sv = &self.nodes[s.0].value;
                        pass(*x, &gy * sv);
                        let gs = (&gy * xv).sum_axis(Axis(1)).insert_axis(Axis(1));
                        pass(*s, gs);
                    }
                    Payload::SoftmaxRows { x } => {
                        let yv = &node.value;
                        let mut gx = &gy * yv;
                        for (mut grow, yrow) in gx.rows_mut().into_iter().zip(yv.rows()) {
                            let dot: f64 = grow.sum();
                            for (g, y) in grow.iter_mut().zip(yrow.iter()) {
                                *g -= dot * y;
                            }
                        }
                        pass(*x, gx);
                    }
                    Payload::MinMax {
                        x,
                        lo,
                        hi,
                        degenerate,
                    } => {
                        if *degenerate {
                            let xv = &self.nodes[x.0].value;
                            pass(*x, Array2::zeros(xv.raw_dim()));
                        } else {
                            let xv = &self.nodes[x.0].value;
                            let range = xv[(*hi, 0)] - xv[(*lo, 0)];
                            let pv = &node.value;
                            let sum_g: f64 = gy.sum();
                            let sum_gp: f64 = (&gy * pv).sum();
                            let mut gx = &gy / range;
                            gx[(*lo, 0)] += (sum_gp - sum_g) / range;
                            gx[(*hi, 0)] -= sum_gp / range;
                            pass(*x, gx);
                        }
                    }
                    Payload::Sum { x } => {
                        let xv = &self.nodes[x.0].value;
                        pass(*x, Array2::from_elem(xv.raw_dim(), gy[(0, 0)]));
                    }
                    Payload::SparseApply { x, op, graph } => {
                        pass(*x, op.apply_transpose(graph, &gy));
                    }
                    Payload::QuadFormLoss { p, graph, beta } => {
                        let pv = &self.nodes[p.0].value;
                        let slice: Vec<f64> = pv.column(0).to_vec();
                        let s: f64 = slice.iter().sum();
                        let g0 = gy[(0, 0)];
                        let mut gp = Array2::zeros(pv.raw_dim());
                        for i in 0..graph.node_count() {
                            let wp: f64 = graph.neighbors(i).iter().map(|&nb| slice[nb]).sum();
                            gp[(i, 0)] =
                                g0 * (-2.0 * (1.0 + beta) * wp + 2.0 * beta * (s - slice[i]));
                        }
                        pass(*p, gp);
                    }
                }
            }
            for (v, g) in contributions {
                Self::accumulate(&mut self.grads, v, g);
            }
        }
        Ok(())
    }
}

/// Maximum relative error between recorded gradients and central finite
/// differences of `f`, sampling at most `max_coords` coordinates per
/// tensor when set.
pub fn grad_check<'g, F>(
    f: F,
    params: &[Array2<f64>],
    h: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> f64
where
    F: Fn(&mut Tape<'g>, &[VarId]) -> VarId,
{
    assert!(h > 0.0, "step size must be positive");
    let mut tape: Tape<'g> = Tape::new();
    let ids: Vec<VarId> = params
        .iter()
        .map(|p| tape.input(p.clone(), true))
        .collect();
    let root = f(&mut tape, &ids);
    tape.backward(root).expect("grad_check root must be scalar");
    let analytic: Vec<Array2<f64>> = ids.iter().map(|&id| tape.grad(id)).collect();

    let eval = |perturbed: &[Array2<f64>]| -> f64 {
        let mut t: Tape<'g> = Tape::new();
        let ids: Vec<VarId> = perturbed.iter().map(|p| t.input(p.clone(), false)).collect();
        let r = f(&mut t, &ids);
        t.value(r)[(0, 0)]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut work: Vec<Array2<f64>> = params.to_vec();
    for (t_idx, p) in params.iter().enumerate() {
        let len = p.len();
        let coords: Vec<usize> = match max_coords {
            Some(m) if len > m => sample(&mut rng, len, m).into_vec(),
            _ => (0..len).collect(),
        };
        for flat in coords {
            let (r, c) = (flat / p.ncols(), flat % p.ncols());
            let orig = work[t_idx][(r, c)];
            work[t_idx][(r, c)] = orig + h;
            let plus = eval(&work);
            work[t_idx][(r, c)] = orig - h;
            let minus = eval(&work);
            work[t_idx][(r, c)] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[t_idx][(r, c)];
            // Two-tolerance comparison: differences below 1e-6 are FD
            // cancellation noise, which would swamp the ratio on
            // coordinates whose true gradient is tiny or exactly zero.
            let diff = (a - numeric).abs();
            if diff >= 1e-6 {
                worst = worst.max(diff / a.abs().max(numeric.abs()));
            }
        }
    }
    worst
}
