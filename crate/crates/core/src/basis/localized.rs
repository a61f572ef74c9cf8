//! Localized neurons
//! `phi_i(x) = exp(-|k_i * (x - x_i)|^2) exp(-|k_i|^2 (u*(x) - u*(x_i))^2 / 2)`,
//! concentrated near a center and along the level set of a reference field
//! `u*` through that center.
//!
//! Only second-order partials are supported. The reference field's value,
//! gradient and Hessian are memoized per point set, since every neuron of
//! every localized stage needs them at the same collocation points.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::BasisSet;
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::jet::Jet;
use crate::linalg::DenseMatrix;
use crate::operators::RowBlock;

/// Highest derivative order of a localized neuron.
pub const LOCALIZED_MAX_ORDER: usize = 2;

/// `[u, u_x, u_y, u_xx, u_xy, u_yy]`, the order-2 partials in jet index order.
pub type SecondOrder = [f64; 6];

pub(crate) fn second_order(j: &Jet) -> SecondOrder {
    let mut out = [0.0; 6];
    for (i, o) in out.iter_mut().enumerate() {
        *o = j.partial_at(i);
    }
    out
}

/// A frozen reference field with memoized second-order partials.
pub struct ReferenceField {
    set: BasisSet,
    cache: Mutex<HashMap<u64, Arc<Vec<SecondOrder>>>>,
}

impl fmt::Debug for ReferenceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceField")
            .field("members", &self.set.members.len())
            .finish()
    }
}

impl ReferenceField {
    pub fn new(set: BasisSet) -> Arc<Self> {
        Arc::new(Self {
            set,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn basis_set(&self) -> &BasisSet {
        &self.set
    }

    pub fn second_order_at(&self, x: &Point) -> Result<SecondOrder> {
        Ok(second_order(&self.set.jet(x, 2)?))
    }

    /// Partials at every point of `points`, computed once per point set.
    pub fn second_order_on(&self, points: &PointSet) -> Result<Arc<Vec<SecondOrder>>> {
        if let Some(v) = self
            .cache
            .lock()
            .expect("reference cache poisoned")
            .get(&points.id())
        {
            return Ok(Arc::clone(v));
        }
        let vals = points
            .points()
            .iter()
            .map(|x| self.second_order_at(x))
            .collect::<Result<Vec<_>>>()?;
        let vals = Arc::new(vals);
        self.cache
            .lock()
            .expect("reference cache poisoned")
            .insert(points.id(), Arc::clone(&vals));
        Ok(vals)
    }

    /// Stores partials for `points` computed elsewhere, e.g. combined from
    /// per-member partials.
    pub fn prefill(&self, points: &PointSet, values: Vec<SecondOrder>) -> Result<()> {
        if values.len() != points.len() {
            return Err(Error::Dimension("prefilled partials vs point set".into()));
        }
        self.cache
            .lock()
            .expect("reference cache poisoned")
            .insert(points.id(), Arc::new(values));
        Ok(())
    }

    /// Drops every memoized point set.
    pub fn clear(&self) {
        self.cache.lock().expect("reference cache poisoned").clear();
    }

    /// Drops memoized partials for point sets that are no longer used.
    pub fn forget(&self, points: &PointSet) {
        self.cache
            .lock()
            .expect("reference cache poisoned")
            .remove(&points.id());
    }
}

/// Second-order partials of one localized neuron at `x`, given the reference
/// partials `u` at `x` and the reference value at the center.
#[inline]
fn neuron_partials(
    x: &Point,
    center: &Point,
    k: &Point,
    u_center: f64,
    u: &SecondOrder,
) -> SecondOrder {
    let (d0, d1) = (x[0] - center[0], x[1] - center[1]);
    let (k0, k1) = (k[0] * k[0], k[1] * k[1]);
    let kk = k0 + k1;
    let du = u[0] - u_center;
    let g = -(k0 * d0 * d0 + k1 * d1 * d1) - 0.5 * kk * du * du;
    if g < -745.0 {
        return [0.0; 6];
    }
    let gx = -2.0 * k0 * d0 - kk * du * u[1];
    let gy = -2.0 * k1 * d1 - kk * du * u[2];
    let gxx = -2.0 * k0 - kk * (u[1] * u[1] + du * u[3]);
    let gxy = -kk * (u[1] * u[2] + du * u[4]);
    let gyy = -2.0 * k1 - kk * (u[2] * u[2] + du * u[5]);
    let phi = g.exp();
    [
        phi,
        phi * gx,
        phi * gy,
        phi * (gxx + gx * gx),
        phi * (gxy + gx * gy),
        phi * (gyy + gy * gy),
    ]
}

/// A family of localized neurons sharing one reference field, combined with
/// `coefficients`.
#[derive(Debug, Clone)]
pub struct LocalizedNetwork {
    dim: usize,
    reference: Arc<ReferenceField>,
    centers: Vec<Point>,
    shapes: Vec<Point>,
    center_values: Vec<f64>,
    coefficients: Vec<f64>,
}

impl LocalizedNetwork {
    pub fn new(
        dim: usize,
        reference: Arc<ReferenceField>,
        centers: Vec<Point>,
        shapes: Vec<Point>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        if shapes.len() != centers.len() || coefficients.len() != centers.len() {
            return Err(Error::Dimension(
                "localized centers, shapes and coefficients".into(),
            ));
        }
        let center_values = centers
            .iter()
            .map(|c| reference.set.jet(c, 0).map(|j| j.value()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            reference,
            centers,
            shapes,
            center_values,
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn shapes(&self) -> &[Point] {
        &self.shapes
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn reference(&self) -> &Arc<ReferenceField> {
        &self.reference
    }

    pub fn set_coefficients(&mut self, c: &[f64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::Dimension("localized coefficients".into()));
        }
        self.coefficients.copy_from_slice(c);
        Ok(())
    }

    /// Each neuron as its own basis function with unit coefficient.
    pub fn into_members(self) -> Vec<super::BasisFunction> {
        (0..self.len())
            .map(|i| {
                super::BasisFunction::Localized(LocalizedNetwork {
                    dim: self.dim,
                    reference: Arc::clone(&self.reference),
                    centers: vec![self.centers[i]],
                    shapes: vec![self.shapes[i]],
                    center_values: vec![self.center_values[i]],
                    coefficients: vec![1.0],
                })
            })
            .collect()
    }

    fn check_order(order: usize) -> Result<()> {
        if order > LOCALIZED_MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                what: "localized neuron",
                requested: order,
                max: LOCALIZED_MAX_ORDER,
            });
        }
        Ok(())
    }

    fn combined(&self, x: &Point, u: &SecondOrder) -> SecondOrder {
        let mut acc = [0.0; 6];
        for i in 0..self.len() {
            let c = self.coefficients[i];
            if c == 0.0 {
                continue;
            }
            let p = neuron_partials(
                x,
                &self.centers[i],
                &self.shapes[i],
                self.center_values[i],
                u,
            );
            for (a, v) in acc.iter_mut().zip(p) {
                *a += c * v;
            }
        }
        acc
    }

    pub fn jet(&self, x: &Point, order: usize) -> Result<Jet> {
        Self::check_order(order)?;
        let u = self.reference.second_order_at(x)?;
        Ok(Jet::from_partials(order, &self.combined(x, &u)))
    }

    pub(crate) fn second_order_on(&self, points: &PointSet) -> Result<Vec<SecondOrder>> {
        let u = self.reference.second_order_on(points)?;
        Ok(points
            .points()
            .iter()
            .zip(u.iter())
            .map(|(x, u)| self.combined(x, u))
            .collect())
    }

    pub(crate) fn apply_block(&self, block: &RowBlock) -> Result<Vec<f64>> {
        Self::check_order(block.required_order())?;
        let u = self.reference.second_order_on(block.points())?;
        let pts = block.points().points();
        let rpp = block.rows_per_point();
        let mut out = Vec::with_capacity(block.len());
        for (p, x) in pts.iter().enumerate() {
            let jet = Jet::from_partials(LOCALIZED_MAX_ORDER, &self.combined(x, &u[p]));
            for k in 0..rpp {
                out.push(block.functional(p * rpp + k).apply(&jet));
            }
        }
        Ok(out)
    }

    pub(crate) fn fill_neuron_columns(
        &self,
        block: &RowBlock,
        out: &mut DenseMatrix,
        row_offset: usize,
        col_offset: usize,
    ) -> Result<()> {
        Self::check_order(block.required_order())?;
        let u = self.reference.second_order_on(block.points())?;
        let pts = block.points().points();
        for r in 0..block.len() {
            let p = block.point_of_row(r);
            let f = block.functional(r);
            let row = &mut out.row_mut(row_offset + r)[col_offset..col_offset + self.len()];
            for (i, slot) in row.iter_mut().enumerate() {
                let v = neuron_partials(
                    &pts[p],
                    &self.centers[i],
                    &self.shapes[i],
                    self.center_values[i],
                    &u[p],
                );
                *slot = f
                    .terms()
                    .iter()
                    .map(|&(a, b, c)| c * v[crate::jet::jet_index(a as usize, b as usize)])
                    .sum();
            }
        }
        Ok(())
    }
}

/// Localized neurons at `centers` with shape parameters drawn uniformly from
/// `(-radius, radius)` per component; coefficients start at zero.
pub fn make_localized_basis<R: Rng + ?Sized>(
    reference: Arc<ReferenceField>,
    centers: &PointSet,
    radius: f64,
    rng: &mut R,
) -> Result<LocalizedNetwork> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(
            "localized shape radius must be positive".into(),
        ));
    }
    let dim = centers.dim();
    let shapes = (0..centers.len())
        .map(|_| {
            let mut k = [0.0; 2];
            for v in k.iter_mut().take(dim) {
                *v = radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            k
        })
        .collect();
    LocalizedNetwork::new(
        dim,
        reference,
        centers.points().to_vec(),
        shapes,
        vec![0.0; centers.len()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisFunction, ClosedForm};
    use crate::rng::{stream, Purpose};

    fn reference() -> Arc<ReferenceField> {
        let f = ClosedForm::new("sin x cos y", 4, |p, o| {
            let x = Jet::variable(o, p[0], 0);
            let y = Jet::variable(o, p[1], 1);
            x.sin() * y.cos() + x * y * 0.3
        });
        ReferenceField::new(BasisSet::new(vec![BasisFunction::ClosedForm(f)], vec![1.0]).unwrap())
    }

    #[test]
    fn unit_at_center_with_flat_gradient() {
        let centers = PointSet::new(2, vec![[0.2, 0.4], [-0.3, 0.1]]);
        let mut rng = stream(1, 0, Purpose::Centers, 0);
        let net = make_localized_basis(reference(), &centers, 10.0, &mut rng).unwrap();
        for (i, m) in net.into_members().into_iter().enumerate() {
            let c = centers.points()[i];
            let j = m.jet(&c, 2).unwrap();
            assert!((j.value() - 1.0).abs() < 1e-15);
            assert!(j.partial(1, 0).abs() < 1e-15 && j.partial(0, 1).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_shape_is_constant_one() {
        let net = LocalizedNetwork::new(
            2,
            reference(),
            vec![[0.0, 0.0]],
            vec![[0.0, 0.0]],
            vec![1.0],
        )
        .unwrap();
        let j = net.jet(&[0.7, -0.2], 2).unwrap();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.partial(2, 0), 0.0);
    }

    #[test]
    fn matches_jet_algebra_oracle() {
        let r = reference();
        let (c, k) = ([0.1, -0.2], [1.5, -2.5]);
        let net = LocalizedNetwork::new(2, Arc::clone(&r), vec![c], vec![k], vec![1.0]).unwrap();
        let uc = r.basis_set().jet(&c, 0).unwrap().value();
        let x0 = [0.3, 0.05];
        let x = Jet::variable(2, x0[0], 0);
        let y = Jet::variable(2, x0[1], 1);
        let u = x.sin() * y.cos() + x * y * 0.3;
        let kk = k[0] * k[0] + k[1] * k[1];
        let dx = x + (-c[0]);
        let dy = y + (-c[1]);
        let du = u + (-uc);
        let g = (dx * dx * (k[0] * k[0]) + dy * dy * (k[1] * k[1])) * -1.0 + du * du * (-0.5 * kk);
        let oracle = g.exp();
        let got = net.jet(&x0, 2).unwrap();
        for i in 0..6 {
            assert!(
                (got.partial_at(i) - oracle.partial_at(i)).abs() < 1e-12,
                "{i}"
            );
        }
        assert!(net.jet(&x0, 3).is_err());
    }

    #[test]
    fn empty_centers_give_empty_family() {
        let mut rng = stream(1, 0, Purpose::Centers, 0);
        let net =
            make_localized_basis(reference(), &PointSet::new(2, vec![]), 1.0, &mut rng).unwrap();
        assert!(net.is_empty());
    }
}
