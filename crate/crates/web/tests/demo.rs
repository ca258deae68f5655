use skinstretch_web::{stretch_patch, synthesize_patch, wrinkle_depth, DEMO_NX, DEMO_NY};

#[test]
fn support_stays_below_the_patch() {
    let p = synthesize_patch(7, 0.01).unwrap();
    assert_eq!((p.height().nx(), p.height().ny()), (DEMO_NX, DEMO_NY));
    let (h, s) = (p.height().values(), p.support().values());
    assert!(h.iter().zip(&s).all(|(h, s)| s <= &(h + 1e-9)));
    assert!(p.offset() > 0.0);
}

#[test]
fn grooves_show_up_as_wrinkles() {
    let d = wrinkle_depth(7, 0.01, 0.15).unwrap();
    assert!(d.max() > 0.15);
    assert_eq!(d.min(), 0.0);
    assert!(wrinkle_depth(7, 0.01, -1.0).is_err());
}

#[test]
fn stretching_loads_the_patch() {
    let s = stretch_patch(7, 3.0, 7.58, 1.0).unwrap();
    assert!(s.sigma_y().max() > 0.0);
    assert_eq!(s.sigma_x().ny(), s.sigma_y().ny() + 1);
    let report: serde_json::Value = serde_json::from_str(&s.report()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(stretch_patch(7, 3.0, 40.0, 1.0).is_err());
}
