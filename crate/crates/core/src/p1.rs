//! Conforming piecewise-linear view of a grid function.
//!
//! Node values are interpolated linearly on the triangulation of the cell-centre
//! lattice that splits every square along its anti-diagonal (in 1D, on the
//! segments between neighbours), with zero values beyond the lattice. Gradients
//! are then exact per triangle, and the `L^{q(x)}` modular is integrated with a
//! degree-6 triangle rule (4-point Gauss on segments). The lower triangle of a
//! square carries the forward difference at its corner and the upper one the
//! backward difference at the opposite corner.

use crate::domain::{GridDomain, Point};
use crate::exponents::ExponentField;

/// Degree-6 rule on the reference triangle: (barycentric, weight / area).
const TRIANGLE_RULE: [([f64; 3], f64); 12] = {
    const A: f64 = 0.501_426_509_658_179;
    const B: f64 = 0.249_286_745_170_910;
    const C: f64 = 0.873_821_971_016_996;
    const D: f64 = 0.063_089_014_491_502;
    const E: f64 = 0.053_145_049_844_817;
    const F: f64 = 0.310_352_451_033_784;
    const G: f64 = 0.636_502_499_121_399;
    const W1: f64 = 0.116_786_275_726_379;
    const W2: f64 = 0.050_844_906_370_207;
    const W3: f64 = 0.082_851_075_618_374;
    [
        ([A, B, B], W1),
        ([B, A, B], W1),
        ([B, B, A], W1),
        ([C, D, D], W2),
        ([D, C, D], W2),
        ([D, D, C], W2),
        ([E, F, G], W3),
        ([E, G, F], W3),
        ([F, E, G], W3),
        ([F, G, E], W3),
        ([G, E, F], W3),
        ([G, F, E], W3),
    ]
};

/// 4-point Gauss–Legendre on [0, 1]: (position, weight).
const SEGMENT_RULE: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_9),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
];

/// Rows of a sparse linear map from node values.
#[derive(Clone, Debug, Default)]
pub(crate) struct SparseRows {
    start: Vec<usize>,
    index: Vec<usize>,
    coef: Vec<f64>,
}

impl SparseRows {
    fn push_row(&mut self, entries: &[(usize, f64)]) {
        if self.start.is_empty() {
            self.start.push(0);
        }
        for &(i, c) in entries {
            self.index.push(i);
            self.coef.push(c);
        }
        self.start.push(self.index.len());
    }

    pub(crate) fn rows(&self) -> usize {
        self.start.len().saturating_sub(1)
    }

    pub(crate) fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|r| {
                (self.start[r]..self.start[r + 1])
                    .map(|k| self.coef[k] * v[self.index[k]])
                    .sum()
            })
            .collect()
    }

    pub(crate) fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for r in 0..self.rows() {
            for k in self.start[r]..self.start[r + 1] {
                out[self.index[k]] += self.coef[k] * y[r];
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct P1Mesh {
    pub(crate) nodes: usize,
    pub(crate) grad_x: SparseRows,
    pub(crate) grad_y: SparseRows,
    pub(crate) grad_exps: Vec<f64>,
    pub(crate) grad_weights: Vec<f64>,
    pub(crate) values: SparseRows,
    pub(crate) value_exps: Vec<f64>,
    pub(crate) value_weights: Vec<f64>,
}

/// Exponent at an off-node point, falling back to the nearest masked sample
/// when the formula is not a valid exponent there.
fn exponent_at(f: &ExponentField, x: Point, fallback: usize) -> f64 {
    let v = f.formula().eval(x);
    if v.is_finite() && v > 1.0 {
        v
    } else {
        f.at(fallback)
    }
}

impl P1Mesh {
    pub(crate) fn build(p: &ExponentField, q: &ExponentField) -> Self {
        let d = p.domain();
        if d.dimension() == 1 {
            Self::build_1d(d, p, q)
        } else {
            Self::build_2d(d, p, q)
        }
    }

    fn build_1d(d: &GridDomain, p: &ExponentField, q: &ExponentField) -> Self {
        let n = d.cells()[0];
        let h = d.spacing()[0];
        let mut m = Self::empty(d.len());
        for i in 0..n {
            let j = (i + 1 < n).then_some(i + 1);
            if !d.is_free(i) && !j.is_some_and(|j| d.is_free(j)) {
                continue;
            }
            let a = d.node(i);
            let mut row = vec![(i, -1.0 / h)];
            if let Some(j) = j {
                row.push((j, 1.0 / h));
            }
            m.grad_x.push_row(&row);
            m.grad_y.push_row(&[]);
            m.grad_exps.push(exponent_at(p, [a[0] + 0.5 * h, 0.0], i));
            m.grad_weights.push(h);
            for (t, w) in SEGMENT_RULE {
                let mut row = vec![(i, 1.0 - t)];
                if let Some(j) = j {
                    row.push((j, t));
                }
                m.values.push_row(&row);
                m.value_exps.push(exponent_at(q, [a[0] + t * h, 0.0], i));
                m.value_weights.push(w * h);
            }
        }
        m
    }

    fn build_2d(d: &GridDomain, p: &ExponentField, q: &ExponentField) -> Self {
        let [nx, ny] = d.cells();
        let [hx, hy] = d.spacing();
        let area = 0.5 * hx * hy;
        let mut m = Self::empty(d.len());
        let at = |ix: usize, iy: usize| (ix < nx && iy < ny).then(|| iy * nx + ix);
        for iy in 0..ny {
            for ix in 0..nx {
                let a = iy * nx + ix;
                let b = at(ix + 1, iy);
                let c = at(ix, iy + 1);
                let dd = at(ix + 1, iy + 1);
                let free = |k: Option<usize>| k.is_some_and(|k| d.is_free(k));
                if !d.is_free(a) && !free(b) && !free(c) && !free(dd) {
                    continue;
                }
                let xa = d.node(a);
                let corners = [
                    xa,
                    [xa[0] + hx, xa[1]],
                    [xa[0], xa[1] + hy],
                    [xa[0] + hx, xa[1] + hy],
                ];
                // lower triangle (a, b, c) and upper triangle (d, c, b)
                let tris: [([Option<usize>; 3], [usize; 3]); 2] =
                    [([Some(a), b, c], [0, 1, 2]), ([dd, c, b], [3, 2, 1])];
                for (t, (ids, pos)) in tris.iter().enumerate() {
                    let (gx, gy): (Vec<(usize, f64)>, Vec<(usize, f64)>) = if t == 0 {
                        (
                            [(Some(a), -1.0 / hx), (b, 1.0 / hx)].iter().filter_map(|&(k, c)| k.map(|k| (k, c))).collect(),
                            [(Some(a), -1.0 / hy), (c, 1.0 / hy)].iter().filter_map(|&(k, c)| k.map(|k| (k, c))).collect(),
                        )
                    } else {
                        (
                            [(dd, 1.0 / hx), (c, -1.0 / hx)].iter().filter_map(|&(k, c)| k.map(|k| (k, c))).collect(),
                            [(dd, 1.0 / hy), (b, -1.0 / hy)].iter().filter_map(|&(k, c)| k.map(|k| (k, c))).collect(),
                        )
                    };
                    let verts = pos.map(|k| corners[k]);
                    let centroid = [
                        (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                        (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
                    ];
                    m.grad_x.push_row(&gx);
                    m.grad_y.push_row(&gy);
                    m.grad_exps.push(exponent_at(p, centroid, a));
                    m.grad_weights.push(area);
                    for (bary, w) in TRIANGLE_RULE {
                        let row: Vec<(usize, f64)> = ids
                            .iter()
                            .zip(bary)
                            .filter_map(|(k, l)| k.map(|k| (k, l)))
                            .collect();
                        let x = [
                            bary[0] * verts[0][0] + bary[1] * verts[1][0] + bary[2] * verts[2][0],
                            bary[0] * verts[0][1] + bary[1] * verts[1][1] + bary[2] * verts[2][1],
                        ];
                        m.values.push_row(&row);
                        m.value_exps.push(exponent_at(q, x, a));
                        m.value_weights.push(w * area);
                    }
                }
            }
        }
        m
    }

    fn empty(nodes: usize) -> Self {
        P1Mesh {
            nodes,
            grad_x: SparseRows::default(),
            grad_y: SparseRows::default(),
            grad_exps: Vec::new(),
            grad_weights: Vec::new(),
            values: SparseRows::default(),
            value_exps: Vec::new(),
            value_weights: Vec::new(),
        }
    }

    pub(crate) fn gradients(&self, v: &[f64]) -> Vec<[f64; 2]> {
        let gx = self.grad_x.apply(v);
        let gy = self.grad_y.apply(v);
        gx.into_iter().zip(gy).map(|(a, b)| [a, b]).collect()
    }

    pub(crate) fn gradients_adjoint(&self, field: &[[f64; 2]]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes];
        let (x, y): (Vec<f64>, Vec<f64>) = field.iter().map(|g| (g[0], g[1])).unzip();
        self.grad_x.apply_transpose(&x, &mut out);
        self.grad_y.apply_transpose(&y, &mut out);
        out
    }
}
