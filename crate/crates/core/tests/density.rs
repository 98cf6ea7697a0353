use seroclass::density::{
    convolve_noise, fit_mle, initial_guess, sample, DensityModel, FitOptions, ModelFamily, NoiseKernel,
    ParametricModel, TruncatedDensity,
};
use seroclass::fixtures;
use seroclass::quadrature::{gauss_legendre, TensorGrid};
use seroclass::{DomainSpec, LogPoint, QuadratureSpec};
use statrs::distribution::{Beta, Continuous, Gamma, Normal};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Composite Gauss-Legendre over `[a, b]` split into `panels` equal pieces.
fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

#[test]
fn negative_marginal_over_cross_axis_is_gamma() {
    let p = fixtures::NEGATIVE;
    let d = TruncatedDensity::parametric(
        fixtures::negative_model(),
        DomainSpec::new(-20.0, 20.0).unwrap(),
        &QuadratureSpec::default(),
    )
    .unwrap();
    let gamma = Gamma::new(p.k, 1.0 / p.theta).unwrap();
    for i in 0..50 {
        let z = 0.2 + 0.06 * i as f64;
        let width = p.alpha * (z / p.beta).exp();
        let nodes = composite_gl(p.mu - 14.0 * width, p.mu + 14.0 * width, 16, 20);
        let marginal: f64 = nodes.iter().map(|(w, wt)| wt * d.shape(LogPoint::from_rotated(z, *w))).sum();
        assert!((marginal - gamma.pdf(z)).abs() < 1e-8, "z = {z}: {marginal} vs {}", gamma.pdf(z));
    }
}

#[test]
fn positive_conditional_is_gaussian() {
    let p = fixtures::POSITIVE;
    let d = TruncatedDensity::parametric(fixtures::positive_model(), DomainSpec::default(), &QuadratureSpec::default())
        .unwrap();
    let beta = Beta::new(p.alpha, p.beta_shape).unwrap();
    for i in 0..50 {
        let zs = 0.3 + 0.012 * i as f64;
        let z = zs * p.z_scale;
        let normal = Normal::new(p.mu, p.theta * zs.sqrt()).unwrap();
        for w in [-0.7, -0.2, 0.0, 0.1, 0.5] {
            let conditional = d.shape(LogPoint::from_rotated(z, w)) / beta.pdf(zs);
            assert!((conditional - normal.pdf(w)).abs() < 1e-8);
        }
    }
}

#[test]
fn linear_units_density_conserves_mass() {
    let quad = QuadratureSpec::default();
    let (pos, neg) = fixtures::densities(&quad).unwrap();
    // geometric panels: each maps to an equal-width panel in log space
    let axis: Vec<(f64, f64)> = {
        let (x, w) = gauss_legendre(16);
        let panels = 70;
        let mut v = Vec::new();
        for k in 0..panels {
            let a = (7.0 * k as f64 / panels as f64).exp();
            let b = (7.0 * (k + 1) as f64 / panels as f64).exp();
            for (xi, wi) in x.iter().zip(&w) {
                v.push((a + 0.5 * (b - a) * (xi + 1.0), 0.5 * (b - a) * wi));
            }
        }
        v
    };
    for d in [&pos, &neg] {
        let mut total = 0.0;
        for (x, wx) in &axis {
            for (y, wy) in &axis {
                total += wx * wy * d.to_linear_units(*x, *y).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-5, "{:?}: {total}", d.family());
    }
}

fn grid_moments(d: &TruncatedDensity) -> (f64, f64, f64, f64, f64) {
    let DensityModel::Gridded(g) = d.model() else { panic!("expected gridded") };
    let dom = g.domain();
    let spec = QuadratureSpec::trapezoid(g.n);
    let grid = TensorGrid::new(&spec, dom).unwrap();
    let m0 = grid.integrate(|p| d.density(p));
    let mx = grid.integrate(|p| d.density(p) * p.lx) / m0;
    let my = grid.integrate(|p| d.density(p) * p.ly) / m0;
    let vx = grid.integrate(|p| d.density(p) * (p.lx - mx).powi(2)) / m0;
    let vy = grid.integrate(|p| d.density(p) * (p.ly - my).powi(2)) / m0;
    (m0, mx, my, vx, vy)
}

#[test]
fn gaussian_noise_adds_variance() {
    let n = 351;
    let quad = QuadratureSpec::trapezoid(n);
    let (_, neg) = fixtures::densities(&QuadratureSpec::default()).unwrap();
    let h = 7.0 / (n - 1) as f64;
    let identity = convolve_noise(&neg, &NoiseKernel::delta(h).unwrap(), &quad).unwrap();
    let sigma = 0.1;
    let noisy = convolve_noise(&neg, &NoiseKernel::gaussian(sigma, h, 7.0).unwrap(), &quad).unwrap();
    let (m0, _, _, vx0, vy0) = grid_moments(&identity);
    let (m1, _, _, vx1, vy1) = grid_moments(&noisy);
    assert!((m0 - 1.0).abs() < 1e-9 && (m1 - 1.0).abs() < 1e-9);
    assert!(rel(vx1, vx0 + sigma * sigma) < 0.01, "{vx1} vs {}", vx0 + sigma * sigma);
    assert!(rel(vy1, vy0 + sigma * sigma) < 0.01, "{vy1} vs {}", vy0 + sigma * sigma);
}

#[test]
fn gaussian_noise_composes() {
    let n = 281;
    let quad = QuadratureSpec::trapezoid(n);
    let (_, neg) = fixtures::densities(&QuadratureSpec::default()).unwrap();
    let h = 7.0 / (n - 1) as f64;
    let (s1, s2) = (0.08f64, 0.15f64);
    let once =
        convolve_noise(&neg, &NoiseKernel::gaussian((s1 * s1 + s2 * s2).sqrt(), h, 7.0).unwrap(), &quad).unwrap();
    let first = convolve_noise(&neg, &NoiseKernel::gaussian(s1, h, 7.0).unwrap(), &quad).unwrap();
    let twice = convolve_noise(&first, &NoiseKernel::gaussian(s2, h, 7.0).unwrap(), &quad).unwrap();
    let DensityModel::Gridded(g) = once.model() else { panic!() };
    let mut sup: f64 = 0.0;
    for i in 0..g.n {
        for j in 0..g.n {
            let p = LogPoint::new(g.node(i), g.node(j));
            sup = sup.max((once.density(p) - twice.density(p)).abs());
        }
    }
    assert!(sup < 1e-3, "sup-norm difference {sup}");
}

fn assert_recovered(truth: &[f64], got: &[f64], seed: u64) {
    for (t, g) in truth.iter().zip(got) {
        assert!(rel(*g, *t) < 0.05, "seed {seed}: {got:?} vs {truth:?}");
    }
}

fn negative_vec(m: &ParametricModel) -> Vec<f64> {
    let ParametricModel::Negative(p) = m else { panic!() };
    vec![p.theta, p.k, p.alpha, p.mu, p.beta]
}

fn positive_vec(m: &ParametricModel) -> Vec<f64> {
    let ParametricModel::Positive(p) = m else { panic!() };
    vec![p.alpha, p.beta_shape, p.theta, p.mu]
}

#[test]
fn mle_recovers_negative_family() {
    let truth = ParametricModel::Negative(seroclass::density::NegativeModelParams {
        theta: 0.5,
        k: 2.0,
        alpha: 0.2,
        mu: 0.3,
        beta: 3.0,
    });
    let d =
        TruncatedDensity::parametric(truth, DomainSpec::new(-10.0, 20.0).unwrap(), &QuadratureSpec::default()).unwrap();
    for seed in 0..2 {
        let pts = sample(&d, 50_000, seed).unwrap();
        let init = initial_guess(&pts, ModelFamily::Negative, 9.0).unwrap();
        let fit = fit_mle(&pts, &init, &FitOptions { seed, ..Default::default() }).unwrap();
        assert!(fit.converged);
        assert_recovered(&negative_vec(&truth), &negative_vec(&fit.model), seed);
    }
}

#[test]
fn mle_recovers_fixture_families() {
    let (pos, neg) = fixtures::densities(&QuadratureSpec::default()).unwrap();
    for seed in 0..2 {
        let pts = sample(&neg, 50_000, seed).unwrap();
        let init = initial_guess(&pts, ModelFamily::Negative, 9.0).unwrap();
        let fit = fit_mle(&pts, &init, &FitOptions { seed, ..Default::default() }).unwrap();
        assert_recovered(&negative_vec(&fixtures::negative_model()), &negative_vec(&fit.model), seed);

        let pts = sample(&pos, 50_000, seed + 100).unwrap();
        let init = initial_guess(&pts, ModelFamily::Positive, 9.0).unwrap();
        let fit = fit_mle(&pts, &init, &FitOptions { seed, ..Default::default() }).unwrap();
        assert_recovered(&positive_vec(&fixtures::positive_model()), &positive_vec(&fit.model), seed);
    }
}
