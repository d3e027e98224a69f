//! Stationary velocity fields: exponentiation, B-spline parametrisation and
//! Sobolev smoothing.

mod bspline;
pub(crate) mod exp;
pub(crate) mod sobolev;

pub use bspline::{bspline_to_dense, control_dims, control_grid, partition_of_unity, BSplineSvf};
pub(crate) use bspline::bspline_adjoint;
pub use exp::{exponentiate, exponentiate_inverse, SvfConfig, MAX_SQUARINGS};
pub use sobolev::{sobolev_smooth, SobolevConfig};

#[cfg(test)]
mod tests {
    use super::exp;
    use crate::field::GridSpec;

    #[test]
    fn non_finite_step_reports_iteration() {
        let g = GridSpec::unit(&[6, 6]).unwrap();
        let mut w = vec![0.5; 72];
        w[30] = f64::NAN;
        match exp::integrate(&g, &w, 1.0, 3) {
            Err(crate::Error::NonFinite { index, .. }) => assert!(index >= 1),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }
}
