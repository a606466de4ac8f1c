use pmc_core::fixtures::{cylinder, euclidean_sphere, hyperbolic_sphere, s3_sphere};
use pmc_core::qdiff::hopf_differential_direct;
use pmc_core::weierstrass::{mesh_mean_curvature, SurfaceMesh};

fn max_hopf(mesh: &SurfaceMesh) -> f64 {
    hopf_differential_direct(mesh).unwrap().max_abs()
}

/// Geodesic spheres are totally umbilic in every space form: the Hopf
/// differential tends to zero at second order.
#[test]
fn geodesic_spheres_are_umbilic() {
    let cases: [(&str, fn(usize) -> SurfaceMesh); 3] = [
        ("R3", |n| euclidean_sphere(n, 1.0)),
        ("H3", |n| hyperbolic_sphere(n, 2.0, 1.0)),
        ("S3", |n| s3_sphere(n, 0.8)),
    ];
    for (name, make) in cases {
        let (a, b) = (max_hopf(&make(32)), max_hopf(&make(64)));
        assert!(b < 1e-2 && a / b > 3.0, "{name}: {a:e} -> {b:e}");
    }
}

#[test]
fn cylinder_is_not_umbilic() {
    let p = max_hopf(&cylinder(32));
    assert!((p - 0.25).abs() < 1e-3, "{p}");
}

#[test]
fn unit_sphere_has_unit_mean_curvature() {
    let h = mesh_mean_curvature(&euclidean_sphere(64, 1.0)).unwrap();
    let err = h.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    assert!(err < 1e-2, "{err}");
}
