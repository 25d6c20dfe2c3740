//! Uniform interval and rectangle meshes with piecewise-linear elements.
//!
//! Quadrature points are stored element by element: element `e` owns the
//! contiguous block `e * k .. (e + 1) * k` where `k` is
//! [`Mesh::qp_per_element`]. Every per-quadrature-point array in the crate
//! (exponent fields, densities, scalar fields) uses this enumeration.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Two-point Gauss abscissae on the unit segment.
const GAUSS2: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];

/// Simplicial discretization of an interval or rectangle.
#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    nodes_per_element: usize,
    on_boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    free_nodes: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
    measures: Vec<f64>,
    basis_grads: Vec<[[f64; 2]; 3]>,
    ref_bary: Vec<[f64; 3]>,
    ref_weights: Vec<f64>,
    qp_coords: Vec<[f64; 2]>,
    qp_weights: Vec<f64>,
    domain_measure: f64,
    fingerprint: u64,
}

impl Mesh {
    /// Uniform partition of `(a, b)` into `n_elements` segments with two-point
    /// Gauss quadrature per segment.
    pub fn interval(a: f64, b: f64, n_elements: usize) -> Result<Mesh> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Argument(format!("interval bounds must satisfy a < b, got ({a}, {b})")));
        }
        if n_elements < 2 {
            return Err(Error::Argument(format!("need at least 2 elements, got {n_elements}")));
        }
        let h = (b - a) / n_elements as f64;
        let nodes: Vec<[f64; 2]> = (0..=n_elements)
            .map(|i| {
                let x = if i == n_elements { b } else { a + h * i as f64 };
                [x, 0.0]
            })
            .collect();
        let elements: Vec<[usize; 3]> = (0..n_elements).map(|i| [i, i + 1, i + 1]).collect();
        let mut on_boundary = vec![false; nodes.len()];
        on_boundary[0] = true;
        on_boundary[n_elements] = true;
        let ref_bary = GAUSS2.iter().map(|&s| [1.0 - s, s, 0.0]).collect();
        Ok(Self::assemble(1, nodes, elements, 2, on_boundary, ref_bary, vec![0.5, 0.5], b - a))
    }

    /// Structured triangulation of `x_range × y_range`; each of the `nx × ny`
    /// cells is split along its rising diagonal. Uses the three-point rule
    /// exact for quadratics.
    pub fn rectangle(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Mesh> {
        let (x0, x1) = x_range;
        let (y0, y1) = y_range;
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) || x0 >= x1 || y0 >= y1 {
            return Err(Error::Argument(format!(
                "degenerate rectangle ({x0}, {x1}) x ({y0}, {y1})"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Argument(format!("need nx, ny >= 2, got nx={nx}, ny={ny}")));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut on_boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { y1 } else { y0 + hy * j as f64 };
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + hx * i as f64 };
                nodes.push([x, y]);
                on_boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            }
        }
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        let ref_bary = vec![[a, b, b], [b, a, b], [b, b, a]];
        let third = 1.0 / 3.0;
        Ok(Self::assemble(
            2,
            nodes,
            elements,
            3,
            on_boundary,
            ref_bary,
            vec![third, third, third],
            (x1 - x0) * (y1 - y0),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        dimension: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        nodes_per_element: usize,
        on_boundary: Vec<bool>,
        ref_bary: Vec<[f64; 3]>,
        ref_weights: Vec<f64>,
        domain_measure: f64,
    ) -> Mesh {
        let mut measures = Vec::with_capacity(elements.len());
        let mut basis_grads = Vec::with_capacity(elements.len());
        for el in &elements {
            if dimension == 1 {
                let h = nodes[el[1]][0] - nodes[el[0]][0];
                measures.push(h);
                basis_grads.push([[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]]);
            } else {
                let [p0, p1, p2] = [nodes[el[0]], nodes[el[1]], nodes[el[2]]];
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                measures.push(0.5 * det.abs());
                basis_grads.push([
                    [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                    [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                    [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
                ]);
            }
        }

        let k = ref_weights.len();
        let mut qp_coords = Vec::with_capacity(elements.len() * k);
        let mut qp_weights = Vec::with_capacity(elements.len() * k);
        for (el, &m) in elements.iter().zip(&measures) {
            for (bary, &w) in ref_bary.iter().zip(&ref_weights) {
                let mut c = [0.0; 2];
                for (v, &b) in el[..nodes_per_element].iter().zip(bary) {
                    c[0] += b * nodes[*v][0];
                    c[1] += b * nodes[*v][1];
                }
                qp_coords.push(c);
                qp_weights.push(w * m);
            }
        }

        let boundary_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| on_boundary[i]).collect();
        let free_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| !on_boundary[i]).collect();
        let mut dof_of_node = vec![None; nodes.len()];
        for (d, &n) in free_nodes.iter().enumerate() {
            dof_of_node[n] = Some(d);
        }

        let fingerprint = fingerprint(dimension, &nodes, &elements);
        Mesh {
            dimension,
            nodes,
            elements,
            nodes_per_element,
            on_boundary,
            boundary_nodes,
            free_nodes,
            dof_of_node,
            measures,
            basis_grads,
            ref_bary,
            ref_weights,
            qp_coords,
            qp_weights,
            domain_measure,
            fingerprint,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    /// Node indices of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.nodes_per_element]
    }

    pub fn element_measures(&self) -> &[f64] {
        &self.measures
    }

    /// Constant gradients of the element's nodal basis functions, in the
    /// order of [`Mesh::element`].
    pub fn basis_gradients(&self, e: usize) -> &[[f64; 2]] {
        &self.basis_grads[e][..self.nodes_per_element]
    }

    /// Exact measure of the meshed domain.
    pub fn measure(&self) -> f64 {
        self.domain_measure
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    /// Interior nodes, i.e. the unconstrained degrees of freedom, in
    /// ascending order.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn qp_per_element(&self) -> usize {
        self.ref_weights.len()
    }

    pub fn n_quad(&self) -> usize {
        self.qp_weights.len()
    }

    pub fn quad_points(&self) -> &[[f64; 2]] {
        &self.qp_coords
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.qp_weights
    }

    /// Barycentric coordinates of the reference quadrature points.
    pub(crate) fn reference_barycentrics(&self) -> &[[f64; 3]] {
        &self.ref_bary
    }

    /// Structural hash used to detect fields sampled on different meshes.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Sum of `weight * density` over all quadrature points.
    pub fn integrate(&self, density: &[f64]) -> Result<f64> {
        if density.len() != self.n_quad() {
            return Err(Error::LengthMismatch { expected: self.n_quad(), actual: density.len() });
        }
        Ok(self.qp_weights.iter().zip(density).map(|(w, d)| w * d).sum())
    }

    /// Evaluate the piecewise-linear interpolant of `nodal` at every
    /// quadrature point.
    pub fn values_at_quad(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_quad());
        for e in 0..self.n_elements() {
            let el = self.element(e);
            for bary in &self.ref_bary {
                out.push(el.iter().zip(bary).map(|(&n, &b)| b * nodal[n]).sum());
            }
        }
        out
    }

    /// Constant gradient of the interpolant of `nodal` on each element.
    /// The second component is zero in 1D.
    pub fn element_gradients(&self, nodal: &[f64]) -> Vec<[f64; 2]> {
        (0..self.n_elements())
            .map(|e| {
                let mut g = [0.0; 2];
                for (&n, bg) in self.element(e).iter().zip(self.basis_gradients(e)) {
                    g[0] += nodal[n] * bg[0];
                    g[1] += nodal[n] * bg[1];
                }
                g
            })
            .collect()
    }

    /// `|∇u|` repeated at each quadrature point of its element.
    pub fn gradient_norms_at_quad(&self, nodal: &[f64]) -> Vec<f64> {
        let k = self.qp_per_element();
        let mut out = Vec::with_capacity(self.n_quad());
        for g in self.element_gradients(nodal) {
            let norm = g[0].hypot(g[1]);
            out.extend(std::iter::repeat(norm).take(k));
        }
        out
    }
}

fn fingerprint(dimension: usize, nodes: &[[f64; 2]], elements: &[[usize; 3]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |v: u64| {
        for byte in v.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(dimension as u64);
    eat(nodes.len() as u64);
    eat(elements.len() as u64);
    for n in nodes {
        eat(n[0].to_bits());
        eat(n[1].to_bits());
    }
    for el in elements {
        for &i in el {
            eat(i as u64);
        }
    }
    h
}

/// Nodal coefficient vector of a piecewise-linear function vanishing on the
/// boundary.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for DiscreteFunction {
    fn eq(&self, other: &Self) -> bool {
        self.mesh.fingerprint() == other.mesh.fingerprint() && self.values == other.values
    }
}

impl DiscreteFunction {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        DiscreteFunction { mesh: Arc::clone(mesh), values: vec![0.0; mesh.n_nodes()] }
    }

    /// Nodal interpolant of `f`; boundary nodes are overwritten with zero.
    pub fn interpolate(mesh: &Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(mesh.n_nodes());
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            values.push(if mesh.is_boundary(i) { 0.0 } else { v });
        }
        Ok(DiscreteFunction { mesh: Arc::clone(mesh), values })
    }

    /// Wrap explicit nodal values; boundary entries are forced to zero.
    pub fn from_nodal(mesh: &Arc<Mesh>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::LengthMismatch { expected: mesh.n_nodes(), actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        for &b in mesh.boundary_nodes() {
            values[b] = 0.0;
        }
        Ok(DiscreteFunction { mesh: Arc::clone(mesh), values })
    }

    /// Build from values on the free nodes, in [`Mesh::free_nodes`] order.
    pub fn from_free(mesh: &Arc<Mesh>, free: &[f64]) -> Result<Self> {
        if free.len() != mesh.free_nodes().len() {
            return Err(Error::LengthMismatch { expected: mesh.free_nodes().len(), actual: free.len() });
        }
        let mut values = vec![0.0; mesh.n_nodes()];
        for (&n, &v) in mesh.free_nodes().iter().zip(free) {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: n });
            }
            values[n] = v;
        }
        Ok(DiscreteFunction { mesh: Arc::clone(mesh), values })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.mesh.free_nodes().iter().map(|&n| self.values[n]).collect()
    }

    pub fn scaled(&self, t: f64) -> Self {
        DiscreteFunction { mesh: Arc::clone(&self.mesh), values: self.values.iter().map(|v| t * v).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn element_gradients(&self) -> Vec<[f64; 2]> {
        self.mesh.element_gradients(&self.values)
    }

    pub fn values_at_quad(&self) -> Vec<f64> {
        self.mesh.values_at_quad(&self.values)
    }

    pub fn gradient_norms_at_quad(&self) -> Vec<f64> {
        self.mesh.gradient_norms_at_quad(&self.values)
    }

    /// CSV with columns `x,value` (1D) or `x,y,value` (2D), one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.mesh.dimension() == 1 {
            writeln!(w, "x,value")?;
            for (x, v) in self.mesh.nodes().iter().zip(&self.values) {
                writeln!(w, "{},{}", x[0], v)?;
            }
        } else {
            writeln!(w, "x,y,value")?;
            for (x, v) in self.mesh.nodes().iter().zip(&self.values) {
                writeln!(w, "{},{},{}", x[0], x[1], v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_counts_and_measure() {
        let m = Mesh::interval(0.0, 1.0, 4).unwrap();
        assert_eq!(m.n_nodes(), 5);
        for (i, n) in m.nodes().iter().enumerate() {
            assert!((n[0] - 0.25 * i as f64).abs() < 1e-15);
        }
        assert!((m.element_measures().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.boundary_nodes(), &[0, 4]);

        let m = Mesh::interval(0.0, PI, 200).unwrap();
        assert_eq!(m.n_nodes(), 201);
        let total: f64 = m.element_measures().iter().sum();
        assert!((total - PI).abs() / PI < 1e-12);
    }

    #[test]
    fn interval_rejects_bad_arguments() {
        assert!(matches!(Mesh::interval(1.0, 0.0, 4), Err(Error::Argument(_))));
        assert!(matches!(Mesh::interval(0.0, 1.0, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn rectangle_counts_and_measure() {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.free_nodes(), &[4]);
        assert!((m.element_measures().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let m = Mesh::rectangle((0.0, 2.0), (0.0, 1.0), 4, 2).unwrap();
        assert!((m.element_measures().iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(m.element_measures().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn rectangle_rejects_bad_arguments() {
        assert!(Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 1, 4).is_err());
        assert!(Mesh::rectangle((0.0, 0.0), (0.0, 1.0), 4, 4).is_err());
    }

    #[test]
    fn rectangle_boundary_tagging() {
        let m = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 5, 3).unwrap();
        for (i, n) in m.nodes().iter().enumerate() {
            let geometric = n[0] == 0.0 || n[0] == 1.0 || n[1] == 0.0 || n[1] == 1.0;
            assert_eq!(geometric, m.is_boundary(i));
        }
    }

    #[test]
    fn integrate_examples() {
        let sq = Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 7, 5).unwrap();
        let ones = vec![1.0; sq.n_quad()];
        assert!((sq.integrate(&ones).unwrap() - 1.0).abs() < 1e-12);

        let m = Mesh::interval(0.0, 1.0, 3).unwrap();
        let x: Vec<f64> = m.quad_points().iter().map(|p| p[0]).collect();
        assert!((m.integrate(&x).unwrap() - 0.5).abs() < 1e-15);

        let m = Mesh::interval(0.0, 1.0, 200).unwrap();
        let x2: Vec<f64> = m.quad_points().iter().map(|p| p[0] * p[0]).collect();
        assert!((m.integrate(&x2).unwrap() - 1.0 / 3.0).abs() < 1e-10);

        assert!(matches!(m.integrate(&[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn quadrature_exactness() {
        // 2-point Gauss: cubics; triangle rule: quadratics.
        let m = Mesh::interval(0.0, 2.0, 3).unwrap();
        let d: Vec<f64> = m.quad_points().iter().map(|p| p[0].powi(3)).collect();
        assert!((m.integrate(&d).unwrap() - 4.0).abs() < 1e-12);

        let sq = Mesh::rectangle((0.0, 1.0), (0.0, 2.0), 3, 4).unwrap();
        let d: Vec<f64> = sq.quad_points().iter().map(|p| p[0] * p[0] + p[0] * p[1]).collect();
        // ∫∫ x² + xy over (0,1)×(0,2) = 2/3 + 1
        assert!((sq.integrate(&d).unwrap() - (2.0 / 3.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn interpolate_examples() {
        let m = Arc::new(Mesh::interval(0.0, 1.0, 4).unwrap());
        let z = DiscreteFunction::interpolate(&m, |_| 0.0).unwrap();
        assert!(z.is_zero());

        let one = DiscreteFunction::interpolate(&m, |_| 1.0).unwrap();
        assert_eq!(one.values(), &[0.0, 1.0, 1.0, 1.0, 0.0]);

        let mp = Arc::new(Mesh::interval(0.0, PI, 20).unwrap());
        let s = DiscreteFunction::interpolate(&mp, |x| x[0].sin()).unwrap();
        let raw: Vec<f64> = mp.nodes().iter().map(|x| x[0].sin()).collect();
        assert!((s.values()[20] - raw[20]).abs() < 1e-15);
        assert!(s.values()[20].abs() < 1e-15);

        assert!(matches!(
            DiscreteFunction::interpolate(&m, |_| f64::NAN),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        let m = Arc::new(Mesh::interval(0.0, 1.0, 4).unwrap());
        let u = DiscreteFunction::interpolate(&m, |x| x[0]).unwrap();
        let g = u.element_gradients();
        // The last element is clipped by the boundary rule.
        for gi in &g[..3] {
            assert!((gi[0] - 1.0).abs() < 1e-12);
        }
        assert!(DiscreteFunction::zeros(&m).element_gradients().iter().all(|g| g == &[0.0, 0.0]));

        let mut hat = vec![0.0; 5];
        hat[2] = 1.0;
        let hat = DiscreteFunction::from_nodal(&m, hat).unwrap();
        let g = hat.element_gradients();
        assert!((g[1][0] - 4.0).abs() < 1e-12);
        assert!((g[2][0] + 4.0).abs() < 1e-12);
        assert_eq!(g[0][0], 0.0);
    }

    #[test]
    fn affine_gradient_in_2d() {
        let m = Arc::new(Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 4, 4).unwrap());
        let nodal: Vec<f64> = m.nodes().iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0).collect();
        for g in m.element_gradients(&nodal) {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_export_has_one_row_per_node() {
        let m = Arc::new(Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap());
        let u = DiscreteFunction::interpolate(&m, |_| 1.0).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[5], "0.5,0.5,1");
    }
}
