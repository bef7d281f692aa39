use super::*;
use crate::function_space::{AnalyticFunction, DomainSpec};
use nalgebra::{DMatrix, DVector};

fn interval() -> DomainSpec {
    DomainSpec::Interval { lo: -1.0, hi: 1.0 }
}

fn sign_data(h: f64) -> GridFunction {
    let far = FarField::Halfspace { negative: -1.0, positive: 1.0 };
    GridFunction::new(interval(), h, 2.0, far, |x| if x[0].abs() < 1.0 { 0.0 } else { x[0].signum() }).unwrap()
}

fn solve(spec: &KernelSpec, data: &GridFunction) -> (GridFunction, SolveLog) {
    let prob = DirichletProblem::new(spec.clone(), data.clone(), 1e-10).unwrap();
    solve_dirichlet_logged(&prob).unwrap()
}

#[test]
fn constants_are_solutions() {
    let spec = KernelSpec::fractional(1, 0.5, 1.5).unwrap();
    let data = GridFunction::new(interval(), 1.0 / 16.0, 2.0, FarField::Constant { value: 0.7 }, |x| {
        if x[0].abs() < 1.0 {
            -3.0
        } else {
            0.7
        }
    })
    .unwrap();
    let (u, _) = solve(&spec, &data);
    assert!(u.values().iter().all(|v| (v - 0.7).abs() < 1e-8));
}

// p = 2 makes the first variation linear. The oracle assembles it directly,
// with the far-field mass of the two half-lines in closed form.
#[test]
fn sign_data_matches_linear_system() {
    let h = 1.0 / 256.0;
    let spec = KernelSpec::fractional(1, 0.5, 2.0).unwrap();
    let data = sign_data(h);
    let (u, log) = solve(&spec, &data);
    assert!(log.converged);

    let sp = spec.sp();
    let c = spec.eval(&[1.0]).unwrap();
    let (lo, hi) = u.cell_box();
    let xs: Vec<f64> = (0..u.len()).map(|k| u.coords(k)[0]).collect();
    let interior = u.interior_indices();
    let m = interior.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (r, &i) in interior.iter().enumerate() {
        let left = c * (xs[i] - lo[0]).powf(-sp) / sp;
        let right = c * (hi[0] - xs[i]).powf(-sp) / sp;
        a[(r, r)] += left + right;
        b[r] += right - left;
        for j in 0..u.len() {
            if j == i {
                continue;
            }
            let k = c * (xs[i] - xs[j]).abs().powf(-1.0 - sp) * h;
            a[(r, r)] += k;
            match interior.iter().position(|&q| q == j) {
                Some(col) => a[(r, col)] -= k,
                None => b[r] += k * data.values()[j],
            }
        }
    }
    let oracle = a.lu().solve(&b).unwrap();
    let mut worst = 0.0f64;
    for (r, &i) in interior.iter().enumerate() {
        worst = worst.max((u.values()[i] - oracle[r]).abs());
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");

    let vals: Vec<f64> = interior.iter().map(|&i| u.values()[i]).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
    for r in 0..m {
        assert!((vals[r] + vals[m - 1 - r]).abs() < 1e-9);
    }
}

#[test]
fn energy_decreases_and_methods_agree() {
    let spec = KernelSpec::fractional(1, 0.6, 1.6).unwrap();
    let data = sign_data(1.0 / 16.0);
    let (newton, log) = solve(&spec, &data);
    for w in log.energies.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-14), "{:?}", log.energies);
    }
    let prob = DirichletProblem::new(spec.clone(), data, 1e-9)
        .unwrap()
        .with_method(Method::CoordinateDescent)
        .with_max_iterations(5000);
    let (cd, log) = solve_dirichlet_logged(&prob).unwrap();
    for w in log.energies.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-14));
    }
    for (a, b) in newton.values().iter().zip(cd.values()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn solution_map_symmetries_and_order() {
    let spec = KernelSpec::fractional(1, 0.5, 3.0).unwrap();
    let f = GridFunction::new(interval(), 1.0 / 16.0, 2.0, FarField::Constant { value: 0.2 }, |x| {
        if x[0].abs() < 1.0 {
            0.0
        } else {
            (3.0 * x[0]).sin().min(0.2)
        }
    })
    .unwrap();
    let (uf, _) = solve(&spec, &f);

    let shifted = f.map(|_, v| v + 1.5).unwrap().with_far_field(FarField::Constant { value: 1.7 }).unwrap();
    let (us, _) = solve(&spec, &shifted);
    let flipped = f.map(|_, v| -v).unwrap().with_far_field(FarField::Constant { value: -0.2 }).unwrap();
    let (un, _) = solve(&spec, &flipped);
    let lower = f.map(|x, v| if x[0] > 0.0 { v - 0.5 } else { v }).unwrap();
    let (ul, _) = solve(&spec, &lower);
    for k in 0..uf.len() {
        assert!((us.values()[k] - uf.values()[k] - 1.5).abs() < 1e-7);
        assert!((un.values()[k] + uf.values()[k]).abs() < 1e-7);
        assert!(uf.values()[k] >= ul.values()[k] - 1e-8);
    }
}

#[test]
fn discrete_minimizer_in_two_dimensions() {
    let spec = KernelSpec::fractional(2, 0.5, 3.0).unwrap();
    let square = DomainSpec::Box { lo: [0.0, 0.0], hi: [1.0, 1.0] };
    let data = GridFunction::new(square, 0.125, 1.5, FarField::Zero, |x| {
        if x[0] > 1.0 && x[0] < 2.0 && x[1] > -0.5 && x[1] < 1.5 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let (u, log) = solve(&spec, &data);
    assert!(log.converged && log.iterations > 1);
    let report = classify_weak(&u, &spec, 1e-8).unwrap();
    assert_eq!(report.classification, WeakClass::Solution);
    for &k in &u.interior_indices() {
        assert!(u.values()[k] > 0.0 && u.values()[k] < 1.0);
    }
}

fn hat(u: &GridFunction, at: f64) -> GridFunction {
    let h = u.h();
    u.map(|x, _| (1.0 - (x[0] - at).abs() / (3.0 * h)).max(0.0)).unwrap()
}

#[test]
fn pairing_is_the_first_variation() {
    let spec = KernelSpec::fractional(1, 0.4, 2.5).unwrap();
    let u = GridFunction::new(interval(), 1.0 / 32.0, 2.0, FarField::Zero, |x| {
        if x[0].abs() < 1.0 {
            x[0].abs()
        } else {
            0.0
        }
    })
    .unwrap();
    let phi = hat(&u, 0.0);
    let pairing = weak_pairing(&u, &phi, &spec).unwrap();
    let t = 1e-5;
    let plus = u.map(|x, v| v + t * phi.value_at(x).unwrap()).unwrap();
    let minus = u.map(|x, v| v - t * phi.value_at(x).unwrap()).unwrap();
    let fd = (discrete_energy(&plus, &spec).unwrap() - discrete_energy(&minus, &spec).unwrap()) / (2.0 * t * spec.p);
    assert!(pairing.signum() == fd.signum());
    assert!((pairing - fd).abs() < 1e-6 * fd.abs(), "{pairing} vs {fd}");

    let psi = hat(&u, 0.5);
    let combo = phi.map(|x, v| 2.0 * v - 3.0 * psi.value_at(x).unwrap()).unwrap();
    let lin = 2.0 * pairing - 3.0 * weak_pairing(&u, &psi, &spec).unwrap();
    let direct = weak_pairing(&u, &combo, &spec).unwrap();
    assert!((lin - direct).abs() <= 1e-12 * lin.abs().max(direct.abs()));

    let constant = u.map(|_, _| 0.0).unwrap();
    assert_eq!(weak_pairing(&constant, &phi, &spec).unwrap(), 0.0);

    let outside = u.map(|x, _| if x[0] >= 1.0 { 1.0 } else { 0.0 }).unwrap();
    assert!(matches!(weak_pairing(&u, &outside, &spec), Err(Error::Support(_))));
}

#[test]
fn bump_turns_solution_into_strict_supersolution() {
    let spec = KernelSpec::fractional(1, 0.5, 2.0).unwrap();
    let (u, _) = solve(&spec, &sign_data(1.0 / 32.0));
    assert_eq!(classify_weak(&u, &spec, 1e-8).unwrap().classification, WeakClass::Solution);
    // The bump is maximal on all of the closed domain, so every increment
    // u(x) - u(y) at an interior x can only grow.
    let bumped = u.map(|x, v| v + 0.5 * (1.0 - (4.0 * (x[0].abs() - 1.0).max(0.0).powi(2))).max(0.0).powi(2)).unwrap();
    let report = classify_weak(&bumped, &spec, 1e-8).unwrap();
    assert!(report.supersolution && !report.subsolution);
    assert_eq!(report.classification, WeakClass::Supersolution);
    let constant = u.map(|_, _| 1.0).unwrap().with_far_field(FarField::Constant { value: 1.0 }).unwrap();
    assert_eq!(classify_weak(&constant, &spec, 1e-12).unwrap().classification, WeakClass::Solution);
}

#[test]
fn pointwise_and_weak_sides_agree() {
    let spec = KernelSpec::fractional(1, 0.9, 1.5).unwrap();
    let region = DomainSpec::Interval { lo: 0.2, hi: 1.0 };
    let affine = AnalyticFunction::affine(1, 0.3, [0.5, 0.0]).unwrap();
    let r = c2_pointwise_to_weak_check(&affine, &region, &spec, 1.0 / 32.0, 5, 1e-6).unwrap();
    assert!(r.all_converged && r.consistent);
    assert!(r.pointwise_min.abs() < 1e-6);
    let constant = AnalyticFunction::constant(1, 2.0).unwrap();
    let r = c2_pointwise_to_weak_check(&constant, &region, &spec, 1.0 / 32.0, 5, 1e-9).unwrap();
    assert!(r.consistent && r.weak.classification == WeakClass::Solution);
}


// The cusp |x|^1.2 capped at radius 3 lies in the tail space for p = 3. It is
// a pointwise subsolution away from 0, so its negative is a supersolution.
#[test]
fn capped_cusp_supersolution_is_weak() {
    let spec = KernelSpec::fractional(1, 0.5, 3.0).unwrap();
    let inner = AnalyticFunction::radial_power(1, [0.0, 0.0], 1.0, 1.2).unwrap();
    let outer = AnalyticFunction::constant(1, 3f64.powf(1.2)).unwrap();
    let cusp = AnalyticFunction::glue(&inner, &outer, [0.0, 0.0], 3.0).unwrap();
    let region = DomainSpec::Interval { lo: 0.1, hi: 0.6 };
    let r = c2_pointwise_to_weak_check(&cusp.scale_shift(-1.0, 0.0).unwrap(), &region, &spec, 1.0 / 32.0, 6, 1e-6).unwrap();
    assert!(r.all_converged && r.pointwise_min > 0.0);
    assert!(r.weak.supersolution && r.consistent);
    let r = c2_pointwise_to_weak_check(&cusp, &region, &spec, 1.0 / 32.0, 6, 1e-6).unwrap();
    assert!(r.pointwise_min < 0.0 && r.weak.classification == WeakClass::Subsolution && r.consistent);
}
