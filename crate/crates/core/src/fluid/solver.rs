//! Midpoint momentum step with pressure, and the divergence projection.
//!
//! The step tests the momentum balance at the midpoint mesh with the velocity
//! unknowns and solves the resulting saddle system directly. Convection is
//! the skew split of the advecting field relative to the mesh motion, so it
//! does no work; the viscous form is symmetric, so on a fixed mesh the kinetic
//! energy drops by exactly `dt mu |grad u_mid|^2` per step.

use super::ops::{Layout, StaggeredOps};
use super::FluidState;
use crate::error::{Error, Result};
use crate::geometry::ColumnMesh;
use crate::linalg::{dot, TripletBuilder};

/// What happens at the shell line.
#[derive(Clone, Copy, Debug)]
pub enum Boundary<'a> {
    /// Shell at rest.
    Static,
    /// New shell velocity prescribed.
    Prescribed(&'a [f64]),
    /// Shell velocity solved together with the fluid. Row `i` of the shell
    /// equation is `weight [(s1 - s0)/dt + implicit s1 + explicit]`, the
    /// fluid traction entering with the opposite sign.
    Shell { weight: f64, explicit: &'a [f64], implicit: &'a [Vec<f64>] },
}

#[derive(Clone, Copy, Debug)]
pub struct FluidStep<'a> {
    pub old: &'a ColumnMesh,
    pub new: &'a ColumnMesh,
    pub mu: f64,
    pub dt: f64,
    /// Advecting flux vector (same layout as the velocity), `None` for Stokes.
    pub advect: Option<&'a [f64]>,
    /// Generalized force conjugate to the midpoint velocity.
    pub force: Option<&'a [f64]>,
    pub boundary: Boundary<'a>,
}

/// Step result with the per-step energy terms (all integrated over the step).
#[derive(Clone, Debug)]
pub struct FluidStepOut {
    pub state: FluidState,
    /// Fluid traction on the shell, per unit of the shell measure.
    pub traction: Vec<f64>,
    pub dissipation: f64,
    /// Work of the convection term on the midpoint velocity (zero up to round-off).
    pub convection_work: f64,
    pub force_work: f64,
    /// Midpoint flux vector, the field the transport sees.
    pub mid: Vec<f64>,
}

pub(crate) fn midpoint_mesh(old: &ColumnMesh, new: &ColumnMesh) -> ColumnMesh {
    let eta: Vec<f64> = old.eta.iter().zip(new.eta.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
    ColumnMesh::new(old.nx, old.nz, old.period, old.height, old.tube, old.profile, &eta)
}

pub fn step_fluid(state: &FluidState, s: &FluidStep) -> Result<FluidStepOut> {
    let (o0, o1) = (StaggeredOps::new(s.old), StaggeredOps::new(s.new));
    let mid = midpoint_mesh(s.old, s.new);
    let oh = StaggeredOps::new(&mid);
    let lay = oh.layout;
    let n = lay.len();
    let nc = lay.ncells();
    let dt = s.dt;
    if !(dt > 0.0) || !(s.mu >= 0.0) {
        return Err(Error::Config(format!("fluid step needs dt > 0 and mu >= 0 (dt = {dt}, mu = {})", s.mu)));
    }

    // convecting velocity relative to the mesh
    let (bx, mut bz) = match s.advect {
        Some(b) => oh.advecting_components(b),
        None => (vec![0.0; n], vec![0.0; n]),
    };
    for k in 0..n {
        bz[k] -= (o1.pos[k][1] - o0.pos[k][1]) / dt;
    }
    let conv = oh.convection(&bx, &bz);
    let q_half = conv.axpby(0.5, &oh.lap, 0.5 * s.mu);

    let c1: Vec<f64> = (0..n).map(|k| (0.25 * o0.mass[k] + 0.75 * o1.mass[k]) / dt).collect();
    let c0: Vec<f64> = (0..n).map(|k| (0.75 * o0.mass[k] + 0.25 * o1.mass[k]) / dt).collect();
    let u0 = o0.velocity(&state.v);
    let tht = oh.t.transpose();

    // K = T_h^T (diag(c1) + Q/2) T_1
    let a_u = q_half.axpby(1.0, &crate::linalg::Csr::from_triplets(n, n, &(0..n).map(|k| (k, k, c1[k])).collect::<Vec<_>>()), 1.0);
    let kmat = tht.matmul(&a_u.matmul(&o1.t));
    let qu0 = q_half.mul(&u0);
    let ru: Vec<f64> = (0..n).map(|k| c0[k] * u0[k] - qu0[k]).collect();
    let mut rhs = oh.t.mul_t(&ru);
    if let Some(f) = s.force {
        for (r, fi) in rhs.iter_mut().zip(f.iter()) {
            *r += fi;
        }
    }
    let fluid_rhs = rhs.clone();

    // saddle system [K + S, -D^T (, 0); D, 0 (, a); (0, a^T, 0)]
    let pinned = !matches!(s.boundary, Boundary::Shell { .. });
    let dim = n + nc + usize::from(pinned);
    let mut b = TripletBuilder::square(dim);
    let sigma0 = lay.shell_velocity(&state.v).to_vec();
    for (i, j, v) in kmat.to_triplets() {
        if pinned && lay.is_top(i) {
            continue;
        }
        b.add(i, j, v);
    }
    match s.boundary {
        Boundary::Static | Boundary::Prescribed(_) => {
            let given: Vec<f64> = match s.boundary {
                Boundary::Prescribed(g) => g.to_vec(),
                _ => vec![0.0; lay.nx],
            };
            if given.len() != lay.nx {
                return Err(Error::Config("prescribed shell velocity has the wrong length".into()));
            }
            let mean = given.iter().sum::<f64>() / lay.nx as f64;
            if mean.abs() > 1e-12 * (1.0 + given.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
                return Err(Error::Config(format!("prescribed shell velocity changes the volume (mean {mean:.3e})")));
            }
            for i in 0..lay.nx {
                let k = lay.top(i);
                b.add(k, k, 1.0);
                rhs[k] = given[i];
            }
            for c in 0..nc {
                b.add(n + c, n + nc, oh.areas[c]);
                b.add(n + nc, n + c, oh.areas[c]);
            }
        }
        Boundary::Shell { weight, explicit, implicit } => {
            for i in 0..lay.nx {
                let k = lay.top(i);
                b.add(k, k, weight / dt);
                for (j, a) in implicit[i].iter().enumerate() {
                    b.add(k, lay.top(j), weight * a);
                }
                rhs[k] += weight * (sigma0[i] / dt - explicit[i]);
            }
        }
    }
    for (c, j, v) in oh.div.to_triplets() {
        if !(pinned && lay.is_top(j)) {
            b.add(j, n + c, -v);
        }
        b.add(n + c, j, v);
    }
    rhs.resize(dim, 0.0);
    let lu = b.factor()?;
    let sol = lu.solve(&rhs);
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged("non-finite fluid solution".into()));
    }
    let v1 = sol[..n].to_vec();
    let p = sol[n..n + nc].to_vec();

    // traction: fluid residual and pressure at the shell rows
    let kv = kmat.mul(&v1);
    let dtp = oh.div.mul_t(&p);
    let weight = match s.boundary {
        Boundary::Shell { weight, .. } => weight,
        _ => 1.0 / lay.nx as f64,
    };
    let traction: Vec<f64> = (0..lay.nx).map(|i| (dtp[lay.top(i)] - (kv[lay.top(i)] - fluid_rhs[lay.top(i)])) / weight).collect();

    let u1 = o1.velocity(&v1);
    let ubar: Vec<f64> = u0.iter().zip(u1.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
    let vmid: Vec<f64> = state.v.iter().zip(v1.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
    let dissipation = dt * s.mu * oh.lap.bilinear(&ubar, &ubar);
    let convection_work = dt * conv.bilinear(&ubar, &ubar);
    let force_work = s.force.map_or(0.0, |f| dt * dot(f, &vmid));
    Ok(FluidStepOut { state: FluidState { v: v1, p, t: state.t + dt }, traction, dissipation, convection_work, force_work, mid: vmid })
}

/// Mass-orthogonal projection onto solenoidal fields. With `keep_shell` the
/// shell-line velocities stay fixed (they must be volume neutral) and the
/// pressure is taken mean-free.
pub fn project_divergence_free(ops: &StaggeredOps, v: &[f64], keep_shell: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let lay: Layout = ops.layout;
    let n = lay.len();
    let nc = lay.ncells();
    let dim = n + nc + usize::from(keep_shell);
    let m = ops.mass_matrix();
    let mut b = TripletBuilder::square(dim);
    let mut rhs = vec![0.0; dim];
    let mv = m.mul(v);
    for (i, j, x) in m.to_triplets() {
        if !(keep_shell && lay.is_top(i)) {
            b.add(i, j, x);
        }
    }
    rhs[..n].copy_from_slice(&mv);
    if keep_shell {
        for i in 0..lay.nx {
            let k = lay.top(i);
            b.add(k, k, 1.0);
            rhs[k] = v[k];
        }
        for c in 0..nc {
            b.add(n + c, n + nc, ops.areas[c]);
            b.add(n + nc, n + c, ops.areas[c]);
        }
    }
    for (c, j, x) in ops.div.to_triplets() {
        if !(keep_shell && lay.is_top(j)) {
            b.add(j, n + c, -x);
        }
        b.add(n + c, j, x);
    }
    let lu = b.factor().map_err(|e| Error::Diverged(format!("pressure projection failed: {e}")))?;
    let sol = lu.solve(&rhs);
    let out = sol[..n].to_vec();
    let worst = ops.max_divergence(&out);
    if !(worst < 1e-8) {
        return Err(Error::Diverged(format!("projection left divergence {worst:.3e}")));
    }
    Ok((out, sol[n..n + nc].to_vec()))
}

/// Traction on the shell of a given velocity, pressure and stress, per unit
/// of the normalized shell measure: `(D^T p)_top - (mu T^T L U + F_stress)_top`
/// scaled by the number of shell nodes. Inertia and convection are left out,
/// so this is the quasi-static traction.
pub fn assemble_coupling_force(ops: &StaggeredOps, state: &FluidState, mu: f64, stress: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let lay = ops.layout;
    let u = ops.velocity(&state.v);
    let visc = ops.t.mul_t(&ops.lap.mul(&u));
    let dtp = ops.div.mul_t(&state.p);
    let fs = split_stress_force(ops, stress);
    (0..lay.nx)
        .map(|i| {
            let k = lay.top(i);
            lay.nx as f64 * (dtp[k] - mu * visc[k] + fs[k])
        })
        .collect()
}

/// Stress force with the deviatoric part acting through the cell gradients
/// and the isotropic part as a discrete gradient, `-D^T (tr tau / 2)`; the
/// latter is what makes an isotropic stress indistinguishable from pressure.
pub fn split_stress_force(ops: &StaggeredOps, tau: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let dev: Vec<[[f64; 2]; 2]> = tau.iter().map(crate::stress::deviatoric).collect();
    let mut f = ops.stress_force(&dev);
    let iso: Vec<f64> = tau.iter().map(|t| -0.5 * (t[0][0] + t[1][1])).collect();
    for (a, b) in f.iter_mut().zip(ops.div.mul_t(&iso).iter()) {
        *a += b;
    }
    f
}
