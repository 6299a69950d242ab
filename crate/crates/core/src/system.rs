//! Comparison-system jump operators and the lifted initial state.
//!
//! With `s = χ_max + χ_{k+1}` (ADT) or `s = χ_{k+1}` (ADT⁺) the comparison
//! system jumps at `t = kθ` by `J = Σ_{m≥0} sᵐ/m! {B,Aᵐ} = B + G`.

use nalgebra::DVector;

use crate::commutator::weighted_commutator_sum;
use crate::error::{invalid, Result};
use crate::impulse_times::Variant;
use crate::numerics::{expm, SquareMatrix};

/// `ẋ = Ax` between impulses, `x(τ_k⁺) = Bx(τ_k)` at impulses.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveSystem {
    a: SquareMatrix,
    b: SquareMatrix,
}

impl ImpulsiveSystem {
    pub fn new(a: SquareMatrix, b: SquareMatrix) -> Result<Self> {
        a.same_dim(&b, "impulsive system")?;
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn b(&self) -> &SquareMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub(crate) fn check_vector(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(invalid(format!(
                "{what} has length {}, system dimension is {}",
                v.len(),
                self.dim()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("{what} has non-finite entries")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonJump {
    pub k: usize,
    /// Full jump operator `J = B + G`.
    pub j: SquareMatrix,
    /// Correction `G = J − B`.
    pub g: SquareMatrix,
    pub variant: Variant,
}

/// Series argument of the comparison jump for a given deviation.
pub fn jump_argument(chi_next: f64, chi_max: f64, variant: Variant) -> f64 {
    match variant {
        Variant::Adt => chi_max + chi_next,
        Variant::AdtPlus => chi_next,
    }
}

fn check_deviation(chi: f64, chi_max: f64, variant: Variant, what: &str) -> Result<()> {
    if !(chi_max >= 0.0) || !chi.is_finite() || !variant.admits(chi, chi_max) {
        let (lo, hi) = variant.deviation_range(chi_max);
        return Err(invalid(format!(
            "{what} = {chi} outside the admissible range [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Jump operator applied at `t = kθ`, built from the deviation `χ_{k+1}`.
pub fn comparison_jump(
    sys: &ImpulsiveSystem,
    k: usize,
    chi_next: f64,
    chi_max: f64,
    variant: Variant,
    rel_tol: f64,
) -> Result<ComparisonJump> {
    check_deviation(chi_next, chi_max, variant, "chi_next")?;
    let s = jump_argument(chi_next, chi_max, variant);
    let j = weighted_commutator_sum(sys.a(), sys.b(), s, None, rel_tol)?;
    let g = &j - sys.b();
    Ok(ComparisonJump { k, j, g, variant })
}

/// Initial state `z₀` of the comparison system for `x(τ₀⁺) = x₀`.
///
/// ADT: `z₀ = Σ (χ₁+χ_max)ᵐ/m! {B,Aᵐ} e^{A(θ−χ_max)} x₀`, so that
/// `x(τ₁⁺) = e^{A(χ₁+χ_max)} z₀`.
/// ADT⁺: `z₀ = Σ χ₁ᵐ/m! {B,Aᵐ} e^{Aθ} x₀`, so that `x(τ₁⁺) = e^{Aχ₁} z₀`.
pub fn lifted_initial(
    sys: &ImpulsiveSystem,
    x0: &DVector<f64>,
    chi_1: f64,
    chi_max: f64,
    theta: f64,
    variant: Variant,
    rel_tol: f64,
) -> Result<DVector<f64>> {
    sys.check_vector(x0, "x0")?;
    if !(theta > 0.0 && chi_max < theta) {
        return Err(invalid(format!(
            "need 0 <= chi_max < theta, got chi_max = {chi_max}, theta = {theta}"
        )));
    }
    check_deviation(chi_1, chi_max, variant, "chi_1")?;
    let (s, lead) = match variant {
        Variant::Adt => (chi_1 + chi_max, theta - chi_max),
        Variant::AdtPlus => (chi_1, theta),
    };
    let flow = expm(sys.a(), lead)?;
    let lift = weighted_commutator_sum(sys.a(), sys.b(), s, Some(flow.as_dmatrix()), rel_tol)?;
    Ok(lift.mul_vec(x0))
}

/// Remaining flow time `T_{·}` in `x(τ_k⁺) = T_{·} ẑ((k−1)θ⁺)`.
pub fn residual_flow_time(chi_k: f64, chi_max: f64, variant: Variant) -> f64 {
    jump_argument(chi_k, chi_max, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commutator::omega_bound;
    use crate::numerics::spectral_norm;
    use proptest::prelude::*;

    fn example() -> ImpulsiveSystem {
        ImpulsiveSystem::new(
            SquareMatrix::from_row_slice(2, &[1.2, 0.1, 0.1, -3.0]).unwrap(),
            SquareMatrix::from_row_slice(2, &[0.2, 0.1, -0.1, 1.5]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn system_requires_matching_dims() {
        assert!(ImpulsiveSystem::new(SquareMatrix::identity(2), SquareMatrix::identity(3)).is_err());
    }

    #[test]
    fn jump_is_b_at_zero_argument() {
        let sys = example();
        let jump = comparison_jump(&sys, 0, -0.1, 0.1, Variant::Adt, 1e-12).unwrap();
        assert_eq!(&jump.j, sys.b());
        assert_eq!(jump.g.max_abs(), 0.0);

        for variant in [Variant::Adt, Variant::AdtPlus] {
            let jump = comparison_jump(&sys, 3, 0.0, 0.0, variant, 1e-12).unwrap();
            assert_eq!(&jump.j, sys.b());
        }
    }

    #[test]
    fn jump_is_b_when_operators_commute() {
        let a = example().a().clone();
        let sys = ImpulsiveSystem::new(a.clone(), a).unwrap();
        for chi in [-0.1, 0.0, 0.07, 0.1] {
            let jump = comparison_jump(&sys, 1, chi, 0.1, Variant::Adt, 1e-12).unwrap();
            assert_eq!(&jump.j, sys.b());
        }
    }

    #[test]
    fn correction_attains_omega_at_the_extreme() {
        let sys = example();
        let omega = omega_bound(sys.a(), sys.b(), 0.1, 1e-12).unwrap();
        let jump = comparison_jump(&sys, 0, 0.1, 0.1, Variant::Adt, 1e-12).unwrap();
        let g = spectral_norm(&jump.g).unwrap();
        assert!(g <= omega + 1e-9);
        assert!(g <= 0.1726 + 5e-4);
    }

    #[test]
    fn jump_rejects_out_of_range_deviation() {
        let sys = example();
        assert!(comparison_jump(&sys, 0, 0.2, 0.1, Variant::Adt, 1e-12).is_err());
        assert!(comparison_jump(&sys, 0, -0.05, 0.1, Variant::AdtPlus, 1e-12).is_err());
    }

    #[test]
    fn lifted_initial_trivial_cases() {
        let sys = example();
        let x0 = DVector::from_vec(vec![1.0, -2.0]);
        let z0 = lifted_initial(&sys, &x0, -0.1, 0.1, 1.0, Variant::Adt, 1e-12).unwrap();
        let want = sys.b().mul_vec(&expm(sys.a(), 0.9).unwrap().mul_vec(&x0));
        assert!((z0 - want).norm() < 1e-14);

        let zero = DVector::zeros(2);
        let z0 = lifted_initial(&sys, &zero, 0.05, 0.1, 1.0, Variant::Adt, 1e-12).unwrap();
        assert_eq!(z0.norm(), 0.0);

        assert!(lifted_initial(&sys, &x0, 0.05, 0.1, 0.1, Variant::Adt, 1e-12).is_err());
        assert!(lifted_initial(&sys, &DVector::zeros(3), 0.0, 0.1, 1.0, Variant::Adt, 1e-12).is_err());
    }

    #[test]
    fn lifted_initial_reproduces_first_jump() {
        // x(τ₁⁺) = B e^{A(θ+χ₁)} x₀ = e^{A(χ₁+χ_max)} z₀
        let sys = example();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        for (chi1, variant) in [(0.063, Variant::Adt), (-0.041, Variant::Adt), (0.08, Variant::AdtPlus)] {
            let z0 = lifted_initial(&sys, &x0, chi1, 0.1, 1.0, variant, 1e-12).unwrap();
            let direct = sys.b().mul_vec(&expm(sys.a(), 1.0 + chi1).unwrap().mul_vec(&x0));
            let via = expm(sys.a(), residual_flow_time(chi1, 0.1, variant))
                .unwrap()
                .mul_vec(&z0);
            assert!((direct.clone() - via).norm() <= 1e-12 * (1.0 + direct.norm()));
        }
    }

    proptest! {
        #[test]
        fn correction_bounded_by_omega(chi in -0.1..=0.1f64) {
            let sys = example();
            let omega = omega_bound(sys.a(), sys.b(), 0.1, 1e-12).unwrap();
            let jump = comparison_jump(&sys, 0, chi, 0.1, Variant::Adt, 1e-12).unwrap();
            prop_assert!(spectral_norm(&jump.g).unwrap() <= omega + 1e-9);
        }

        #[test]
        fn lifted_initial_is_linear(
            x in prop::collection::vec(-5.0..5.0f64, 2),
            y in prop::collection::vec(-5.0..5.0f64, 2),
            c in -3.0..3.0f64,
            chi in -0.1..=0.1f64,
        ) {
            let sys = example();
            let x = DVector::from_vec(x);
            let y = DVector::from_vec(y);
            let lift = |v: &DVector<f64>| lifted_initial(&sys, v, chi, 0.1, 1.0, Variant::Adt, 1e-12).unwrap();
            let combined = lift(&(&x * c + &y));
            let separate = lift(&x) * c + lift(&y);
            prop_assert!((&combined - &separate).norm() <= 1e-11 * (1.0 + combined.norm()));
        }
    }
}
