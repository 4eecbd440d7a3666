//! Evidence lower bound for the Gaussian-likelihood SVGP and its analytic gradient.
//!
//! For one output with batch `B` drawn from `N` points,
//!
//! ```text
//! L = (N/|B|) Σ_{i∈B} [ log N(y_i | μ_i, σ_ε²) - Σ_ii / (2σ_ε²) ] - KL[N(m,S) ‖ N(0,K)]
//! ```
//!
//! Parameters are differentiated in the unconstrained space: log hyperparameters,
//! raw inducing locations, raw variational mean, and the lower triangle of `C` with
//! its diagonal in log space.

use nalgebra::{DMatrix, DVector};

use super::{Dataset, SparseGp, SvgpModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// Gradient of one output's ELBO term.
#[derive(Clone, Debug)]
pub struct OutputGradient<T: Scalar> {
    /// `(log σ_f², log l_1..l_n, log σ_ε²)`
    pub kernel: DVector<T>,
    pub inducing: DMatrix<T>,
    pub mean: DVector<T>,
    /// Lower triangle; diagonal entries are derivatives w.r.t. `log C_jj`.
    pub chol: DMatrix<T>,
}

struct Pieces<T: Scalar> {
    value: T,
    grad: Option<OutputGradient<T>>,
}

fn check_batch<T: Scalar>(
    model: &SvgpModel<T>,
    batch: &Dataset<T>,
    full_size: usize,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    if full_size < batch.len() {
        return Err(Error::invalid(
            "full data size must be at least the batch size",
        ));
    }
    if batch.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "batch inputs",
            expected: model.input_dim(),
            got: batch.input_dim(),
        });
    }
    if batch.output_dim() != model.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "batch outputs",
            expected: model.output_dim(),
            got: batch.output_dim(),
        });
    }
    Ok(())
}

fn output_elbo<T: Scalar>(
    gp: &SparseGp<T>,
    jitter: T,
    x: &DMatrix<T>,
    y: &DVector<T>,
    scale: T,
    want_grad: bool,
) -> Result<Pieces<T>> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let z = &gp.variational.inducing;
    let m = &gp.variational.mean;
    let c = &gp.variational.chol;
    let mm = z.nrows();
    let b = x.nrows();
    let n = x.ncols();
    let sf2 = gp.kernel.signal_variance();
    let s2 = gp.kernel.noise_variance();

    let kzz = gp.kernel.gram(z);
    let mut k = kzz.clone();
    let jit = jitter * sf2;
    for i in 0..mm {
        k[(i, i)] += jit;
    }
    let ch = linalg::cholesky(&k, "k(Z,Z)")?;
    let kinv = linalg::symmetrize(&ch.inverse());
    let kxz = gp.kernel.cross(x, z);
    let a = &kxz * &kinv;
    let s = c * c.transpose();
    let mu = &a * m;
    let a_s = &a * &s;

    let mut ell = T::zero();
    let mut sigma = DVector::zeros(b);
    let log2pis2 = (T::two_pi() * s2).ln();
    for i in 0..b {
        let mut q = T::zero();
        let mut r = T::zero();
        for j in 0..mm {
            q += a[(i, j)] * kxz[(i, j)];
            r += a_s[(i, j)] * a[(i, j)];
        }
        sigma[i] = sf2 - q + r;
        let res = y[i] - mu[i];
        ell += -half * log2pis2 - (res * res + sigma[i]) / (two * s2);
    }
    ell *= scale;

    let kinv_m = &kinv * m;
    let mut logdet_s = T::zero();
    for j in 0..mm {
        logdet_s += c[(j, j)].ln();
    }
    logdet_s *= two;
    let kl = half
        * ((&kinv.component_mul(&s)).sum() + m.dot(&kinv_m) - T::from_usize_lossy(mm)
            + linalg::chol_logdet(&ch)
            - logdet_s);
    let value = ell - kl;
    if !want_grad {
        return Ok(Pieces { value, grad: None });
    }

    // sensitivities of the expected log-likelihood
    let cc = -scale / (two * s2);
    let res = y - &mu;
    let g_mu = &res * (scale / s2);
    let mut g_lnoise = T::zero();
    for i in 0..b {
        g_lnoise += -half + (res[i] * res[i] + sigma[i]) / (two * s2);
    }
    g_lnoise *= scale;

    // G_A = g_μ mᵀ + c (2 A S - Kxz)
    let g_a = &g_mu * m.transpose() + (&a_s * two - &kxz) * cc;
    let g_a_kinv = &g_a * &kinv;
    let g_kxz = &a * (-cc) + &g_a_kinv;
    let mut g_k = -(a.transpose() * &g_a_kinv);
    let mut g_s = a.transpose() * &a * cc;
    let mut g_m = a.transpose() * &g_mu;

    // KL contributions (ELBO = ELL - KL)
    g_m -= &kinv_m;
    g_s -= &kinv * half;
    let kinv_s_kinv = &kinv * &s * &kinv;
    g_k -= (&kinv - &kinv_s_kinv - &kinv_m * kinv_m.transpose()) * half;

    // chain through S = C Cᵀ; the +½ log|S| term contributes 1/C_jj on the diagonal
    let g_s = linalg::symmetrize(&g_s);
    let g_c_full = (&g_s * c) * two;
    let mut g_c = DMatrix::zeros(mm, mm);
    for i in 0..mm {
        for j in 0..i {
            g_c[(i, j)] = g_c_full[(i, j)];
        }
        g_c[(i, i)] = g_c_full[(i, i)] * c[(i, i)] + T::one();
    }

    // kernel hyperparameters and inducing locations
    let w_xz = g_kxz.component_mul(&kxz);
    let w_zz = g_k.component_mul(&kzz);
    let w_zz_sym = &w_zz + w_zz.transpose();
    let mut g_kernel = DVector::zeros(n + 2);
    g_kernel[0] = w_xz.sum() + g_k.component_mul(&k).sum() + cc * T::from_usize_lossy(b) * sf2;
    g_kernel[n + 1] = g_lnoise;

    let col_xz = w_xz.row_sum(); // 1×M, sums over batch rows
    let row_xz = w_xz.column_sum(); // B-vector
    let row_zz_sym = w_zz_sym.column_sum();
    let wt_x = w_xz.transpose() * x; // M×n
    let wzz_z = &w_zz_sym * z; // M×n
    let mut g_z = DMatrix::zeros(mm, n);
    for j in 0..n {
        let inv = (-(gp.kernel.log_lengthscales[j] * two)).exp();
        // Σ_{i,a} W[i,a](x_ij - z_aj)² = Σ_i x_ij² rs_i - 2 Σ_a z_aj (Wᵀx)_aj + Σ_a z_aj² cs_a
        let mut sxz = T::zero();
        for i in 0..b {
            sxz += x[(i, j)] * x[(i, j)] * row_xz[i];
        }
        for a_ in 0..mm {
            sxz += -two * z[(a_, j)] * wt_x[(a_, j)] + z[(a_, j)] * z[(a_, j)] * col_xz[a_];
        }
        let mut szz = T::zero();
        for a_ in 0..mm {
            for b_ in 0..mm {
                let d = z[(a_, j)] - z[(b_, j)];
                szz += w_zz[(a_, b_)] * d * d;
            }
        }
        g_kernel[1 + j] = (sxz + szz) * inv;
        for a_ in 0..mm {
            g_z[(a_, j)] = (wt_x[(a_, j)] - z[(a_, j)] * col_xz[a_] - z[(a_, j)] * row_zz_sym[a_]
                + wzz_z[(a_, j)])
                * inv;
        }
    }

    Ok(Pieces {
        value,
        grad: Some(OutputGradient {
            kernel: g_kernel,
            inducing: g_z,
            mean: g_m,
            chol: g_c,
        }),
    })
}

/// ELBO of `model` on `batch`, rescaled as if the batch were drawn from `full_size` points.
pub fn elbo<T: Scalar>(model: &SvgpModel<T>, batch: &Dataset<T>, full_size: usize) -> Result<T> {
    check_batch(model, batch, full_size)?;
    let scale = T::from_usize_lossy(full_size) / T::from_usize_lossy(batch.len());
    let mut total = T::zero();
    for (d, gp) in model.outputs().iter().enumerate() {
        total += output_elbo(
            gp,
            model.jitter(),
            batch.inputs(),
            &batch.output_column(d),
            scale,
            false,
        )?
        .value;
    }
    Ok(total)
}

/// ELBO value and per-output gradients.
pub fn elbo_with_output_gradients<T: Scalar>(
    model: &SvgpModel<T>,
    batch: &Dataset<T>,
    full_size: usize,
) -> Result<(T, Vec<OutputGradient<T>>)> {
    check_batch(model, batch, full_size)?;
    let scale = T::from_usize_lossy(full_size) / T::from_usize_lossy(batch.len());
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(model.output_dim());
    for (d, gp) in model.outputs().iter().enumerate() {
        let p = output_elbo(
            gp,
            model.jitter(),
            batch.inputs(),
            &batch.output_column(d),
            scale,
            true,
        )?;
        total += p.value;
        grads.push(p.grad.expect("gradient requested"));
    }
    Ok((total, grads))
}

/// Gradient of [`elbo`] flattened in [`ParamLayout::independent`] order.
pub fn elbo_gradient<T: Scalar>(
    model: &SvgpModel<T>,
    batch: &Dataset<T>,
    full_size: usize,
) -> Result<DVector<T>> {
    let (_, grads) = elbo_with_output_gradients(model, batch, full_size)?;
    let layout = ParamLayout::independent(model);
    Ok(layout.pack_gradients(&grads))
}

/// Deterministic ordering of every trainable scalar.
///
/// Per output: `log σ_f²`, `log l_1..l_n`, `log σ_ε²`, `Z` (row-major), `m`, then the
/// lower triangle of `C` row by row with diagonal entries in log space. When the
/// inducing locations are shared, a single `Z` block comes first and the per-output
/// blocks omit it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    input_dim: usize,
    num_inducing: Vec<usize>,
    shared_inducing: bool,
}

impl ParamLayout {
    pub fn independent<T: Scalar>(model: &SvgpModel<T>) -> Self {
        Self {
            input_dim: model.input_dim(),
            num_inducing: model
                .outputs()
                .iter()
                .map(|g| g.variational.num_inducing())
                .collect(),
            shared_inducing: false,
        }
    }

    pub fn shared<T: Scalar>(model: &SvgpModel<T>) -> Result<Self> {
        let first = &model.outputs()[0].variational.inducing;
        if model
            .outputs()
            .iter()
            .any(|g| &g.variational.inducing != first)
        {
            return Err(Error::invalid(
                "shared layout needs identical inducing locations across outputs",
            ));
        }
        Ok(Self {
            shared_inducing: true,
            ..Self::independent(model)
        })
    }

    pub fn len(&self) -> usize {
        let n = self.input_dim;
        let mut total = 0;
        if self.shared_inducing {
            total += self.num_inducing[0] * n;
        }
        for &m in &self.num_inducing {
            total += n + 2 + m + m * (m + 1) / 2;
            if !self.shared_inducing {
                total += m * n;
            }
        }
        total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack<T: Scalar>(&self, model: &SvgpModel<T>) -> DVector<T> {
        let mut v = Vec::with_capacity(self.len());
        if self.shared_inducing {
            v.extend(linalg::flatten_row_major(
                &model.outputs()[0].variational.inducing,
            ));
        }
        for gp in model.outputs() {
            v.push(gp.kernel.log_signal_variance);
            v.extend(gp.kernel.log_lengthscales.iter().copied());
            v.push(gp.kernel.log_noise_variance);
            if !self.shared_inducing {
                v.extend(linalg::flatten_row_major(&gp.variational.inducing));
            }
            v.extend(gp.variational.mean.iter().copied());
            let c = &gp.variational.chol;
            for i in 0..c.nrows() {
                for j in 0..i {
                    v.push(c[(i, j)]);
                }
                v.push(c[(i, i)].ln());
            }
        }
        DVector::from_vec(v)
    }

    pub fn pack_gradients<T: Scalar>(&self, grads: &[OutputGradient<T>]) -> DVector<T> {
        let mut v = Vec::with_capacity(self.len());
        if self.shared_inducing {
            let mut gz = grads[0].inducing.clone();
            for g in &grads[1..] {
                gz += &g.inducing;
            }
            v.extend(linalg::flatten_row_major(&gz));
        }
        for g in grads {
            v.extend(g.kernel.iter().copied());
            if !self.shared_inducing {
                v.extend(linalg::flatten_row_major(&g.inducing));
            }
            v.extend(g.mean.iter().copied());
            for i in 0..g.chol.nrows() {
                for j in 0..=i {
                    v.push(g.chol[(i, j)]);
                }
            }
        }
        DVector::from_vec(v)
    }

    /// Rebuilds a model from a packed vector.
    pub fn unpack<T: Scalar>(&self, params: &DVector<T>, jitter: T) -> Result<SvgpModel<T>> {
        if params.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.len(),
                got: params.len(),
            });
        }
        let n = self.input_dim;
        let mut pos = 0usize;
        let mut take = |k: usize| {
            let s = &params.as_slice()[pos..pos + k];
            pos += k;
            s.to_vec()
        };
        let shared_z = if self.shared_inducing {
            let m = self.num_inducing[0];
            Some(DMatrix::from_row_slice(m, n, &take(m * n)))
        } else {
            None
        };
        let mut outputs = Vec::with_capacity(self.num_inducing.len());
        for &m in &self.num_inducing {
            let lsf = take(1)[0];
            let ll = DVector::from_vec(take(n));
            let lnoise = take(1)[0];
            let z = match &shared_z {
                Some(z) => z.clone(),
                None => DMatrix::from_row_slice(m, n, &take(m * n)),
            };
            let mean = DVector::from_vec(take(m));
            let tri = take(m * (m + 1) / 2);
            let mut c = DMatrix::zeros(m, m);
            let mut t = 0;
            for i in 0..m {
                for j in 0..i {
                    c[(i, j)] = tri[t];
                    t += 1;
                }
                c[(i, i)] = tri[t].exp();
                t += 1;
            }
            outputs.push(SparseGp {
                kernel: super::KernelParams {
                    log_signal_variance: lsf,
                    log_lengthscales: ll,
                    log_noise_variance: lnoise,
                },
                variational: super::VariationalParams {
                    inducing: z,
                    mean,
                    chol: c,
                },
            });
        }
        SvgpModel::new(n, jitter, outputs)
    }
}

/// Closed-form optimal `q(u)` for fixed hyperparameters and inducing locations:
/// `S = K (K + σ⁻² K_zx K_xz)⁻¹ K`, `m = σ⁻² S K⁻¹ K_zx y`.
pub fn optimal_variational<T: Scalar>(
    model: &SvgpModel<T>,
    data: &Dataset<T>,
) -> Result<SvgpModel<T>> {
    let mut outputs = Vec::with_capacity(model.output_dim());
    for (d, gp) in model.outputs().iter().enumerate() {
        let k = gp.inducing_cov(model.jitter());
        let kzx = gp.kernel.cross(&gp.variational.inducing, data.inputs());
        let inv_s2 = T::one() / gp.kernel.noise_variance();
        let inner = &k + &kzx * kzx.transpose() * inv_s2;
        let inner_ch = linalg::cholesky(&linalg::symmetrize(&inner), "K + σ⁻² K_zx K_xz")?;
        let s = linalg::symmetrize(&(&k * inner_ch.solve(&k)));
        let y = data.output_column(d);
        // m = σ⁻² K (K + σ⁻² K_zx K_xz)⁻¹ K_zx y
        let m = &k * inner_ch.solve(&(&kzx * y)) * inv_s2;
        let c = linalg::cholesky(&s, "optimal S")?.l();
        let mut next = gp.clone();
        next.variational.mean = m;
        next.variational.chol = c;
        outputs.push(next);
    }
    SvgpModel::new(model.input_dim(), model.jitter(), outputs)
}
