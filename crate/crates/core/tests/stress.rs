use polyshell::fokker_planck::{ConfigDensity, FokkerPlanck};
use polyshell::geometry::ColumnMesh;
use polyshell::polymer_model::{PhysicalParams, PolymerModel, SpringKind, SpringLaw};
use polyshell::stress::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fp(kind: SpringKind, nr: usize, eth: f64) -> FokkerPlanck {
    let params = PhysicalParams::new(0.1, 0.01, 1.0, 0.3, eth, vec![vec![1.0]]).unwrap();
    let law = SpringLaw::new(kind, 10.0, 1, 2).unwrap();
    FokkerPlanck::new(PolymerModel::new(law, None, params).unwrap(), nr, 16, f64::INFINITY).unwrap()
}

#[test]
fn zero_density_gives_zero_stress() {
    let f = fp(SpringKind::Fene, 8, 0.2);
    let st = ConfigDensity { psi: vec![0.0; 3 * f.nq()], ncells: 3, nq: f.nq(), t: 0.0 };
    let s = kramers_stress(&st, &f.marginal(&st), &f);
    assert!(s.total.iter().all(|t| frobenius(t) == 0.0));
}

#[test]
fn hookean_equilibrium_stress() {
    let (k, eth) = (0.3, 0.2);
    let f = fp(SpringKind::Hookean, 32, eth);
    let st = ConfigDensity::equilibrium(1, f.nq());
    let s = kramers_stress(&st, &f.marginal(&st), &f);
    let t = s.total[0];
    assert!((t[0][0] + k + eth).abs() < 1e-8 && (t[1][1] + k + eth).abs() < 1e-8 && t[0][1].abs() < 1e-12);
}

/// Smooth positive state `exp(a . q + c q1 q2 + d |q|^2)` with its gradient.
#[allow(clippy::type_complexity)]
fn smooth(rng: &mut ChaCha8Rng) -> (impl Fn([f64; 2]) -> f64, impl Fn([f64; 2]) -> [f64; 2]) {
    let a = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
    let c: f64 = rng.random_range(-0.2..0.2);
    let d: f64 = rng.random_range(-0.1..0.1);
    let p = move |q: [f64; 2]| (a[0] * q[0] + a[1] * q[1] + c * q[0] * q[1] + d * (q[0] * q[0] + q[1] * q[1])).exp();
    let g = move |q: [f64; 2]| {
        let v = p(q);
        [v * (a[0] + c * q[1] + 2.0 * d * q[0]), v * (a[1] + c * q[0] + 2.0 * d * q[1])]
    };
    (p, g)
}

#[test]
fn fene_force_law_and_gradient_forms_agree_on_smooth_states() {
    let f = fp(SpringKind::Fene, 8, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (p, g) = smooth(&mut rng);
        let (fl, gr, mass) = continuous_forms(&f.model.maxwellian, &p, &g, 24, 96);
        let mut rhs = gr;
        rhs[0][0] += mass;
        rhs[1][1] += mass;
        let diff = [[fl[0][0] - rhs[0][0], fl[0][1] - rhs[0][1]], [fl[1][0] - rhs[1][0], fl[1][1] - rhs[1][1]]];
        assert!(frobenius(&diff) <= 1e-6 * frobenius(&fl), "{fl:?} vs {rhs:?}");
    }
}

#[test]
fn discrete_forms_agree_cell_by_cell() {
    let f = fp(SpringKind::Fene, 10, 0.1);
    let mesh = ColumnMesh::flat(3, 2, 1.0, 1.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let st = ConfigDensity::from_fn(&mesh, &f.grid, |x, q| (0.3 * q[0] + x[0]).cos().abs() + 0.1 * q[1] * q[1] + x[1]);
    let mut st2 = st.clone();
    for v in st2.psi.iter_mut() {
        *v *= rng.random_range(0.5..1.5);
    }
    for s in [&st, &st2] {
        let xi = f.marginal(s);
        let a = kramers_stress(s, &xi, &f);
        let b = kramers_stress_gradient_form(s, &xi, &f);
        for (x, y) in a.total.iter().zip(b.total.iter()) {
            let d = [[x[0][0] - y[0][0], x[0][1] - y[0][1]], [x[1][0] - y[1][0], x[1][1] - y[1][1]]];
            assert!(frobenius(&d) <= 1e-12 * (1.0 + frobenius(x)));
            assert!((x[0][1] - x[1][0]).abs() < 1e-12);
        }
    }
}

/// Density with a sharp spike of height `peak` in one configuration cell per spatial cell.
fn spiky(f: &FokkerPlanck, ncells: usize, peak: f64) -> ConfigDensity {
    let nq = f.nq();
    let mut psi = vec![1.0; ncells * nq];
    for c in 0..ncells {
        psi[c * nq + (7 * c + 30) % nq] = peak;
        psi[c * nq + (11 * c + 3) % nq] = 0.5 * peak;
    }
    ConfigDensity { psi, ncells, nq, t: 0.0 }
}

#[test]
fn truncated_parts_grow_at_most_linearly() {
    let f = fp(SpringKind::Fene, 8, 0.0);
    for ell in [1.0, 2.0, 4.0, 8.0, 16.0] {
        for peak in [ell, 10.0 * ell, 1e4] {
            let st = spiky(&f, 4, peak);
            let sup = truncated_spring_parts(&st, &f.grid, ell).iter().map(frobenius).fold(0.0, f64::max);
            assert!(sup <= TRUNCATION_CONSTANT * ell, "l = {ell}, peak = {peak}: {sup}");
        }
    }
}

#[test]
fn truncation_is_inactive_below_the_level_and_converges() {
    let f = fp(SpringKind::Fene, 8, 0.1);
    let st = spiky(&f, 3, 12.0);
    let xi = f.marginal(&st);
    let exact = kramers_stress_gradient_form(&st, &xi, &f);
    let mut last = f64::INFINITY;
    for ell in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let t = truncated_stress(&st, &xi, &f, ell);
        let err: f64 = t
            .total
            .iter()
            .zip(exact.total.iter())
            .map(|(a, b)| frobenius(&[[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]))
            .fold(0.0, f64::max);
        assert!(err <= last + 1e-14);
        last = err;
    }
    assert!(last < 1e-10);
}

proptest! {
    #[test]
    fn isotropic_part_does_not_change_drag_power(
        t in prop::array::uniform4(-5.0f64..5.0), g in prop::array::uniform3(-3.0f64..3.0), alpha in -10.0f64..10.0
    ) {
        let tm = [[t[0], t[1]], [t[2], t[3]]];
        let gm = [[g[0], g[1]], [g[2], -g[0]]];
        let shifted = [[t[0] + alpha, t[1]], [t[2], t[3] + alpha]];
        let a = drag_power(&[tm], &[gm], &[0.7]);
        let b = drag_power(&[shifted], &[gm], &[0.7]);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
