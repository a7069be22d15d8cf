//! Reference cases used by the tests, the CLI examples and the Python smoke test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::equilibrium::synthesize_equilibrium;
use crate::linearization::{build_jacobian, JacobianForm};
use crate::modal::{eigendecompose, ModalTolerances};
use crate::model::{MachineParams, NetworkParams, SystemCase, DEFAULT_OMEGA_S};

/// Two identical machines on a lossless line: `ω_s / 2H = 1`, `D / 2H = 0.1`,
/// `C_12 = C_21 = 1`, zero mechanical power. The relative mode obeys
/// `λ² + 0.1 λ + 2 = 0`.
pub fn case_a() -> SystemCase {
    let machine = MachineParams::new(10.0, 2.0, 0.0, 1.0);
    SystemCase {
        omega_s: 20.0,
        machines: vec![machine; 2],
        network: NetworkParams {
            g: DVector::zeros(2),
            c: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            dmat: DMatrix::zeros(2, 2),
        },
    }
}

/// [`case_a`] with `D = [2, 4]`, i.e. damping ratios 0.1 and 0.2.
pub fn case_a_nonuniform() -> SystemCase {
    let mut case = case_a();
    case.machines[1].d = 4.0;
    case
}

/// A random uniform-damping case with a synthesized equilibrium.
///
/// `H ∈ [1, 10]`, symmetric `C ∈ [0, 2]`, symmetric `Dmat ∈ [0, 0.2]`,
/// `G ∈ [0, 0.2]`, `E ∈ [0.9, 1.2]`, `c ∈ [0.05, 0.5]` and equilibrium angles
/// in `[-0.45, 0.45]` so that every pairwise difference is below 1 rad.
/// Returns the case (with `P_m` set so the angles are an exact equilibrium)
/// and the equilibrium angles. Draws whose Jacobian lacks `m - 1` oscillatory
/// pairs (weak coupling against strong damping) are discarded and redrawn.
pub fn random_uniform_case<R: Rng + ?Sized>(rng: &mut R, m: usize) -> (SystemCase, DVector<f64>) {
    for _ in 0..10_000 {
        let (case, delta_s) = draw_case(rng, m);
        let ok = build_jacobian(&case, &delta_s, JacobianForm::Physical)
            .and_then(|b| eigendecompose(&b, &ModalTolerances::default()))
            .is_ok();
        if ok {
            return (case, delta_s);
        }
    }
    panic!("no oscillatory case found for m = {m}");
}

fn draw_case<R: Rng + ?Sized>(rng: &mut R, m: usize) -> (SystemCase, DVector<f64>) {
    let c_ratio = rng.gen_range(0.05..0.5);
    let machines = (0..m)
        .map(|_| {
            let h = rng.gen_range(1.0..10.0);
            MachineParams::new(h, 2.0 * h * c_ratio, 0.0, rng.gen_range(0.9..1.2))
        })
        .collect();
    let mut c = DMatrix::zeros(m, m);
    let mut dmat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let cij = rng.gen_range(0.0..2.0);
            let dij = rng.gen_range(0.0..0.2);
            c[(i, j)] = cij;
            c[(j, i)] = cij;
            dmat[(i, j)] = dij;
            dmat[(j, i)] = dij;
        }
    }
    let g = DVector::from_fn(m, |_, _| rng.gen_range(0.0..0.2));
    let case = SystemCase {
        omega_s: DEFAULT_OMEGA_S,
        machines,
        network: NetworkParams { g, c, dmat },
    };
    let delta_s = DVector::from_fn(m, |_, _| rng.gen_range(-0.45..0.45));
    let case = synthesize_equilibrium(&case, &delta_s).expect("dimensions are consistent");
    (case, delta_s)
}
