use nodalquad_core::poly::Axis;
use nodalquad_core::{Poly2, VecPoly2};
use proptest::prelude::*;

fn poly(max_degree: u8) -> impl Strategy<Value = Poly2> {
    // total degree i + j stays at most max_degree
    prop::collection::vec(((0..=max_degree), (0..=max_degree), -2.0..2.0f64), 0..8).prop_map(move |terms| {
        Poly2::from_terms(terms.into_iter().map(|(i, j, c)| ((i, j % (max_degree - i + 1)), c)))
    })
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    [-1.5..1.5f64, -1.5..1.5f64]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn addition_is_commutative_and_associative(a in poly(4), b in poly(4), c in poly(4)) {
        prop_assert!((&(&a + &b) - &(&b + &a)).max_abs_coeff() < 1e-14);
        let l = &(&a + &b) + &c;
        let r = &a + &(&b + &c);
        prop_assert!((&l - &r).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn multiplication_distributes(a in poly(4), b in poly(4), c in poly(4), p in point()) {
        let l = &a * &(&b + &c);
        let r = &(&a * &b) + &(&a * &c);
        prop_assert!((&l - &r).max_abs_coeff() < 1e-12);
        prop_assert!(close((&a * &b).eval(p), a.eval(p) * b.eval(p)));
    }

    #[test]
    fn additive_inverse_and_identity(a in poly(5)) {
        prop_assert!((&a - &a).is_zero() || (&a - &a).max_abs_coeff() == 0.0);
        let one = Poly2::constant(1.0);
        prop_assert!((&(&a * &one) - &a).max_abs_coeff() == 0.0);
    }

    #[test]
    fn evaluation_commutes_with_arithmetic(a in poly(4), b in poly(4), s in -3.0..3.0f64, p in point()) {
        prop_assert!(close((&a + &b).eval(p), a.eval(p) + b.eval(p)));
        prop_assert!(close((&a - &b).eval(p), a.eval(p) - b.eval(p)));
        prop_assert!(close(a.scale(s).eval(p), s * a.eval(p)));
    }

    #[test]
    fn divergence_of_curl_vanishes(a in poly(6)) {
        prop_assert!(a.curl().div().max_abs_coeff() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference(a in poly(4), p in point()) {
        let h = 1e-6;
        let fx = (a.eval([p[0] + h, p[1]]) - a.eval([p[0] - h, p[1]])) / (2.0 * h);
        let fy = (a.eval([p[0], p[1] + h]) - a.eval([p[0], p[1] - h])) / (2.0 * h);
        let scale = 1.0 + a.max_abs_coeff() * 50.0;
        prop_assert!((a.diff(Axis::X).eval(p) - fx).abs() < 1e-6 * scale);
        prop_assert!((a.diff(Axis::Y).eval(p) - fy).abs() < 1e-6 * scale);
    }

    #[test]
    fn hessian_is_symmetric(a in poly(5)) {
        let h = a.hessian();
        prop_assert!((&h[0][1] - &h[1][0]).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn affine_composition_evaluates_pointwise(
        a in poly(4),
        m in [[-2.0..2.0f64, -2.0..2.0f64], [-2.0..2.0f64, -2.0..2.0f64]],
        c in point(),
        p in point(),
    ) {
        let q = a.compose_affine(m, c);
        let mapped = [m[0][0] * p[0] + m[0][1] * p[1] + c[0], m[1][0] * p[0] + m[1][1] * p[1] + c[1]];
        let scale = 1.0 + a.max_abs_coeff() * 1e3;
        prop_assert!((q.eval(p) - a.eval(mapped)).abs() < 1e-10 * scale);
    }
}

#[test]
fn curl_of_cubic_monomial() {
    // curl(x^2 y) = (x^2, -2xy)
    let c = Poly2::monomial(2, 1, 1.0).curl();
    let want = VecPoly2::new(Poly2::monomial(2, 0, 1.0), Poly2::monomial(1, 1, -2.0));
    assert_eq!((&c - &want).max_abs_coeff(), 0.0);
}
