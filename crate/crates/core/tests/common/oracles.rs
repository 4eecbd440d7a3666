//! Independent reference implementations shared by the oracle tests and the acceptance suite.

pub mod gp {
    use crate::common::*;
    use gpcs::gp::{
        elbo, Dataset, KernelParams, ParamLayout, SparseGp, SvgpModel, VariationalParams,
    };
    use nalgebra::{DMatrix, DVector};

    pub fn dense_posterior(
        k: &KernelParams<f64>,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        q: &[f64],
    ) -> (f64, f64) {
        let (sf2, ls, s2) = kernel_parts(k);
        let n = x.nrows();
        let mut kxx = dense_gram(k, x, x);
        for i in 0..n {
            kxx[(i, i)] += s2;
        }
        let inv = kxx.try_inverse().unwrap();
        let ks = DVector::from_fn(n, |i, _| se(sf2, &ls, q, &row(x, i)));
        let mean = ks.dot(&(&inv * y));
        let var = sf2 - ks.dot(&(&inv * &ks));
        (mean, var)
    }

    pub fn dense_log_marginal(k: &KernelParams<f64>, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let (_, _, s2) = kernel_parts(k);
        let n = x.nrows();
        let mut kxx = dense_gram(k, x, x);
        for i in 0..n {
            kxx[(i, i)] += s2;
        }
        let det = kxx.clone().lu().determinant();
        let inv = kxx.try_inverse().unwrap();
        -0.5 * y.dot(&(&inv * y))
            - 0.5 * det.ln()
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn full_inducing_model(
        r: &mut rand_chacha::ChaCha8Rng,
        data: &Dataset<f64>,
        jitter: f64,
    ) -> SvgpModel<f64> {
        let n = data.len();
        let outputs = (0..data.output_dim())
            .map(|_| SparseGp {
                kernel: random_kernel(r, data.input_dim()),
                variational: VariationalParams {
                    inducing: data.inputs().clone(),
                    mean: DVector::zeros(n),
                    chol: DMatrix::identity(n, n),
                },
            })
            .collect();
        SvgpModel::new(data.input_dim(), jitter, outputs).unwrap()
    }

    pub fn check_gradient(
        model: &SvgpModel<f64>,
        layout: &ParamLayout,
        g: &DVector<f64>,
        batch: &Dataset<f64>,
        full: usize,
    ) {
        let base = layout.pack(model);
        assert_eq!(g.len(), base.len());
        let h = 1e-5;
        let f = |p: &DVector<f64>| {
            elbo(&layout.unpack(p, model.jitter()).unwrap(), batch, full).unwrap()
        };
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let tol = f64::max(1e-5, 1e-3 * g[i].abs());
            assert!(
                (fd - g[i]).abs() <= tol,
                "component {i}: analytic {} vs fd {fd}",
                g[i]
            );
        }
    }
}

pub mod sdp {
    use gpcs::sdp::{LmiQpProblem, SymSparse};
    use nalgebra::{DMatrix, DVector, SymmetricEigen};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Spread of the unconstrained minimizer around the feasible point.
    pub const OFFSET: f64 = 2.0;

    pub fn random_symmetric(rng: &mut ChaCha8Rng, s: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(s, s, |_, _| rng.gen_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    pub fn random_psd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
        let l = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        &l * l.transpose() + DMatrix::identity(p, p) * 0.1
    }

    pub struct Instance {
        pub prob: LmiQpProblem<f64>,
        pub feasible: DVector<f64>,
    }

    /// `F(x_feas) = I`, with the unconstrained minimizer usually outside the feasible set.
    pub fn random_instance(rng: &mut ChaCha8Rng, p: usize, s: usize) -> Instance {
        let feasible = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let dense: Vec<DMatrix<f64>> = (0..p).map(|_| random_symmetric(rng, s)).collect();
        let mut f0 = DMatrix::identity(s, s);
        for (k, f) in dense.iter().enumerate() {
            f0 -= f * feasible[k];
        }
        let q = random_psd(rng, p);
        let target = &feasible + DVector::from_fn(p, |_, _| rng.gen_range(-OFFSET..OFFSET));
        let lin = -(&q * &target);
        let c = 0.5 * target.dot(&(&q * &target));
        let prob = LmiQpProblem::new(
            q,
            lin,
            c,
            f0,
            dense.iter().map(SymSparse::from_dense).collect(),
        )
        .unwrap();
        Instance { prob, feasible }
    }

    pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(m.as_slice())
    }

    pub fn psd_project(m: &DMatrix<f64>) -> DMatrix<f64> {
        let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
        let d = e.eigenvalues.map(|v| v.max(0.0));
        &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
    }

    pub struct OracleSolution {
        pub x: DVector<f64>,
        pub dual: DMatrix<f64>,
    }

    /// Scaled ADMM on `F(x) = Z, Z ⪰ 0`; equalities are kept exactly in the x-update.
    pub fn admm_oracle(prob: &LmiQpProblem<f64>) -> OracleSolution {
        let p = prob.dim();
        let s = prob.lmi_size();
        let rho = 1.0;
        let mut a = DMatrix::zeros(s * s, p);
        for (k, f) in prob.lmi_terms.iter().enumerate() {
            a.set_column(k, &vec_of(&f.to_dense()));
        }
        let b = vec_of(&prob.lmi_constant);
        let m = prob.eq_matrix.nrows();
        let mut kkt = DMatrix::zeros(p + m, p + m);
        kkt.view_mut((0, 0), (p, p))
            .copy_from(&(&prob.hessian + a.transpose() * &a * rho));
        kkt.view_mut((p, 0), (m, p)).copy_from(&prob.eq_matrix);
        kkt.view_mut((0, p), (p, m))
            .copy_from(&prob.eq_matrix.transpose());
        let lu = kkt.lu();
        let mut z = DVector::zeros(s * s);
        let mut u = DVector::zeros(s * s);
        let mut x = DVector::zeros(p);
        for _ in 0..200_000 {
            let mut rhs = DVector::zeros(p + m);
            rhs.rows_mut(0, p)
                .copy_from(&(-&prob.linear - a.transpose() * (&b - &z + &u) * rho));
            rhs.rows_mut(p, m).copy_from(&prob.eq_rhs);
            x = lu.solve(&rhs).unwrap().rows(0, p).into_owned();
            let ax = &a * &x + &b;
            let z_new = vec_of(&psd_project(&DMatrix::from_column_slice(
                s,
                s,
                (&ax + &u).as_slice(),
            )));
            let dual_res = (&z_new - &z).norm() * rho;
            z = z_new;
            u += &ax - &z;
            if (&ax - &z).norm() < 1e-13 && dual_res < 1e-13 {
                break;
            }
        }
        OracleSolution {
            x,
            dual: DMatrix::from_column_slice(s, s, (-&u * rho).as_slice()),
        }
    }
}

pub mod lcs {
    use gpcs::dynamics::LinearizedModel;
    use gpcs::lcs::PolicyParams;
    use nalgebra::{DMatrix, DVector};

    fn affine(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DVector<f64>,
        w: DMatrix<f64>,
    ) -> LinearizedModel<f64> {
        let n = a.nrows();
        let m = b.ncols();
        LinearizedModel {
            a,
            b,
            d,
            w,
            state: DVector::zeros(n),
            input: DVector::zeros(m),
        }
    }

    pub fn double_integrator(dt: f64, noise: f64) -> LinearizedModel<f64> {
        affine(
            DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[0.5 * dt * dt, dt]),
            DVector::zeros(2),
            DMatrix::identity(2, 2) * noise,
        )
    }

    /// Closed-loop moments by stepping the recursion and tracking each state's linear
    /// dependence on the initial deviation and on every disturbance.
    pub fn recursion_moments(
        lin: &LinearizedModel<f64>,
        policy: &PolicyParams<f64>,
        mu: &DVector<f64>,
        sigma: &DMatrix<f64>,
        horizon: usize,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = lin.a.nrows();
        let m = lin.b.ncols();
        let mut mean = mu.clone();
        let mut init = DMatrix::identity(n, n);
        let mut dist = DMatrix::zeros(n, horizon * n);
        for j in 0..horizon {
            let v = policy.feedforward.rows(j * m, m);
            let lam = policy.initial_gain.rows(j * m, m);
            let theta = policy.disturbance_gain.rows(j * m, m);
            mean = &lin.a * &mean + &lin.b * v + &lin.d;
            init = &lin.a * &init + &lin.b * lam;
            dist = &lin.a * &dist + &lin.b * theta;
            let mut block = dist.columns_mut(j * n, n);
            block += DMatrix::<f64>::identity(n, n);
        }
        let mut cov = &init * sigma * init.transpose();
        for i in 0..horizon {
            let c = dist.columns(i * n, n);
            cov += &c * &lin.w * c.transpose();
        }
        (mean, cov)
    }
}
