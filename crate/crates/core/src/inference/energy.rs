//! Forward energy and hand-written reverse pass for a registration pair.

use crate::error::{ensure_finite, Error, Result};
use crate::field::interp::{bilinear, stencil};
use crate::field::{GridSpec, ScalarField, VectorField};
use crate::likelihood::{data_energy_grad, standardise_forward, LikelihoodState};
use crate::regulariser::{reg_energy_grad, RegulariserState};
use crate::svf::exp::{integrate, integrate_adjoint};
use crate::svf::sobolev::{smooth_values, smooth_values_adjoint};
use crate::svf::{bspline_adjoint, bspline_to_dense, control_grid, BSplineSvf, SobolevConfig, SvfConfig};

/// How the optimised parameters map to the dense velocity.
#[derive(Clone, Debug, PartialEq)]
pub enum Parametrisation {
    /// One vector per voxel, optionally passed through the Sobolev filter.
    Dense { sobolev: Option<SobolevConfig> },
    /// Cubic B-spline control points every `spacing` voxels.
    BSpline { spacing: usize },
}

#[derive(Clone, Debug)]
pub struct EnergyGradient {
    /// Gradient of `energy_data + energy_reg` with respect to the parameters.
    pub d_w: Vec<f64>,
    pub energy_data: f64,
    pub energy_reg: f64,
    pub alpha_used: f64,
    pub residual: ScalarField,
    pub chi2: f64,
}

impl EnergyGradient {
    pub fn energy(&self) -> f64 {
        self.energy_data + self.energy_reg
    }
}

#[derive(Debug)]
pub struct RegistrationProblem {
    fixed: ScalarField,
    moving: ScalarField,
    svf: SvfConfig,
    param: Parametrisation,
    ctrl_grid: Option<GridSpec>,
    fixed_std: std::sync::Mutex<Option<(usize, std::sync::Arc<Vec<f64>>)>>,
}

impl RegistrationProblem {
    pub fn new(fixed: ScalarField, moving: ScalarField, svf: SvfConfig, param: Parametrisation) -> Result<Self> {
        fixed.grid().check_same(moving.grid(), "registration pair")?;
        svf.validate()?;
        let ctrl_grid = match &param {
            Parametrisation::Dense { sobolev: Some(s) } => {
                s.validate()?;
                None
            }
            Parametrisation::Dense { sobolev: None } => None,
            Parametrisation::BSpline { spacing } => Some(control_grid(fixed.grid(), *spacing)?),
        };
        Ok(Self {
            fixed,
            moving,
            svf,
            param,
            ctrl_grid,
            fixed_std: Default::default(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.fixed.grid()
    }

    pub fn fixed(&self) -> &ScalarField {
        &self.fixed
    }

    pub fn moving(&self) -> &ScalarField {
        &self.moving
    }

    pub fn svf(&self) -> SvfConfig {
        self.svf
    }

    pub fn parametrisation(&self) -> &Parametrisation {
        &self.param
    }

    /// Grid on which the parameters live.
    pub fn param_grid(&self) -> &GridSpec {
        self.ctrl_grid.as_ref().unwrap_or(self.fixed.grid())
    }

    pub fn num_params(&self) -> usize {
        self.param_grid().num_voxels() * self.grid().ndim()
    }

    /// Degrees of freedom of the transformation prior.
    pub fn nu(&self) -> f64 {
        self.num_params() as f64
    }

    fn check_len(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        ensure_finite(params, "parameters")
    }

    /// Dense velocity for a parameter vector.
    pub fn velocity(&self, params: &[f64]) -> Result<VectorField> {
        self.check_len(params)?;
        let grid = self.grid();
        match &self.param {
            Parametrisation::Dense { sobolev: None } => Ok(VectorField::new(grid.clone(), params.to_vec())?),
            Parametrisation::Dense { sobolev: Some(s) } => {
                Ok(VectorField::from_parts_unchecked(grid.clone(), smooth_values(grid, params, s)))
            }
            Parametrisation::BSpline { spacing } => {
                let ctrl = VectorField::new(self.param_grid().clone(), params.to_vec())?;
                bspline_to_dense(&BSplineSvf::new(ctrl, *spacing)?, grid)
            }
        }
    }

    fn velocity_adjoint(&self, v_bar: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        match &self.param {
            Parametrisation::Dense { sobolev: None } => v_bar.to_vec(),
            Parametrisation::Dense { sobolev: Some(s) } => smooth_values_adjoint(grid, v_bar, s),
            Parametrisation::BSpline { spacing } => bspline_adjoint(grid, self.param_grid(), *spacing, v_bar),
        }
    }

    /// Displacement of the inverse transformation, the one that resamples the moving image.
    pub fn inverse_displacement(&self, params: &[f64]) -> Result<VectorField> {
        let v = self.velocity(params)?;
        let mut steps = integrate(self.grid(), v.values(), -1.0, self.svf.num_squarings)?;
        Ok(VectorField::from_parts_unchecked(self.grid().clone(), steps.pop().unwrap()))
    }

    fn standardised_fixed(&self, window: usize) -> Result<std::sync::Arc<Vec<f64>>> {
        let mut slot = self.fixed_std.lock().expect("cache lock");
        if let Some((w, v)) = slot.as_ref() {
            if *w == window {
                return Ok(v.clone());
            }
        }
        let st = standardise_forward(self.grid(), self.fixed.values(), window)?;
        let v = std::sync::Arc::new(st.out);
        *slot = Some((window, v.clone()));
        Ok(v)
    }

    pub fn evaluate(&self, params: &[f64], like: &LikelihoodState, reg: &RegulariserState) -> Result<EnergyGradient> {
        let v = self.velocity(params)?;
        let grid = self.grid();
        let d = grid.ndim();
        let dims = grid.dims();
        let strides = grid.strides();
        let steps = integrate(grid, v.values(), -1.0, self.svf.num_squarings)?;
        let u = steps.last().unwrap();

        let mv = self.moving.values();
        let n = grid.num_voxels();
        let mut warped = vec![0.0; n];
        let mut pos = [0.0; 3];
        let positions = |i: usize| {
            let (x, y) = (i / dims[1], i % dims[1]);
            bilinear(dims[0], dims[1], x as f64 + u[2 * i], y as f64 + u[2 * i + 1])
        };
        if d == 2 {
            for (i, w) in warped.iter_mut().enumerate() {
                *w = positions(i).sample(mv, dims[1], 1, 0);
            }
        }
        for i in (0..n).filter(|_| d != 2) {
            let c = grid.coords(i);
            for a in 0..d {
                pos[a] = c[a] as f64 + u[i * d + a];
            }
            let st = stencil(dims, &strides, &pos[..d]);
            warped[i] = (0..st.n).map(|k| st.w[k] * mv[st.idx[k]]).sum();
        }

        let sf = self.standardised_fixed(like.window)?;
        let sm = standardise_forward(grid, &warped, like.window)?;
        let r: Vec<f64> = sf.iter().zip(&sm.out).map(|(a, b)| a - b).collect();
        ensure_finite(&r, "residuals")?;
        let (energy_data, g_r) = data_energy_grad(&r, like)?;

        let m_bar: Vec<f64> = g_r.iter().map(|g| -g).collect();
        let warped_bar = sm.adjoint(grid, &m_bar);
        let mut u_bar = vec![0.0; n * d];
        for i in 0..n {
            let g = warped_bar[i];
            if g == 0.0 {
                continue;
            }
            if d == 2 {
                let (_, dx, dy) = positions(i).sample_grad(mv, dims[1], 1, 0);
                u_bar[2 * i] = g * dx;
                u_bar[2 * i + 1] = g * dy;
                continue;
            }
            let c = grid.coords(i);
            for a in 0..d {
                pos[a] = c[a] as f64 + u[i * d + a];
            }
            let st = stencil(dims, &strides, &pos[..d]);
            for a in 0..d {
                let s: f64 = (0..st.n).map(|k| st.dw[a][k] * mv[st.idx[k]]).sum();
                u_bar[i * d + a] = g * s;
            }
        }
        let mut v_bar = integrate_adjoint(grid, &steps, -1.0, u_bar);
        ensure_finite(&v_bar, "scaling and squaring adjoint")?;

        let (chi2, _) = crate::field::squared_gradient_norm_and_normal(&v);
        let (energy_reg, g_reg) = reg_energy_grad(&v, reg);
        if !energy_reg.is_finite() {
            return Err(Error::NonFinite {
                stage: "regularisation energy",
                index: 0,
            });
        }
        v_bar.iter_mut().zip(&g_reg).for_each(|(a, b)| *a += b);
        let d_w = self.velocity_adjoint(&v_bar);
        ensure_finite(&d_w, "parameter gradient")?;
        Ok(EnergyGradient {
            d_w,
            energy_data,
            energy_reg,
            alpha_used: like.alpha,
            residual: ScalarField::from_parts_unchecked(grid.clone(), r),
            chi2,
        })
    }
}

/// Energy and gradient for a dense, unsmoothed velocity field.
pub fn energy_and_grad(
    fixed: &ScalarField,
    moving: &ScalarField,
    w: &VectorField,
    like: &LikelihoodState,
    reg: &RegulariserState,
    svf: SvfConfig,
) -> Result<EnergyGradient> {
    w.grid().check_same(fixed.grid(), "velocity")?;
    let problem = RegistrationProblem::new(fixed.clone(), moving.clone(), svf, Parametrisation::Dense { sobolev: None })?;
    problem.evaluate(w.values(), like, reg)
}
