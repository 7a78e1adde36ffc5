use std::ffi::{CStr, CString};
use std::ptr;

use tree_history_ffi::*;

fn parse(text: &str) -> *mut ThTree {
    let text = CString::new(text).unwrap();
    let mut tree = ptr::null_mut();
    assert_eq!(unsafe { th_tree_parse(text.as_ptr(), &mut tree) }, ThStatus::Ok);
    tree
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(th_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn star_posterior_and_sets() {
    let tree = parse("c a\nc b\nc d\n");
    unsafe {
        assert_eq!(th_tree_len(tree), 4);
        let mut post = ptr::null_mut();
        assert_eq!(th_posterior_new(tree, &mut post), ThStatus::Ok);
        let mut probs = [0.0; 4];
        assert_eq!(th_posterior_root_probs(tree, post, probs.as_mut_ptr(), 4), ThStatus::Ok);
        let label = CString::new("c").unwrap();
        let mut c = usize::MAX;
        assert_eq!(th_tree_index_of(tree, label.as_ptr(), &mut c), ThStatus::Ok);
        assert!((probs[c] - 0.5).abs() < 1e-12);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut lh = 0.0;
        assert_eq!(th_posterior_log_hist(tree, post, c, &mut lh), ThStatus::Ok);
        assert!((lh - 6f64.ln()).abs() < 1e-12);

        let mut size = 0;
        let mut buf = [0usize; 4];
        assert_eq!(th_confidence_set(tree, post, 0.51, buf.as_mut_ptr(), 4, &mut size), ThStatus::Ok);
        assert_eq!(size, 1);
        assert_eq!(CStr::from_ptr(th_tree_label(tree, buf[0])).to_str().unwrap(), "c");

        assert_eq!(th_confidence_set(tree, post, 0.05, ptr::null_mut(), 0, &mut size), ThStatus::BufferTooSmall);
        assert_eq!(size, 4);
        assert_eq!(th_confidence_set(tree, post, 1.5, buf.as_mut_ptr(), 4, &mut size), ThStatus::InvalidArgument);
        assert!(last_error().contains("epsilon"));

        let mut order = [0usize; 4];
        assert_eq!(th_sample_history(tree, post, 7, order.as_mut_ptr(), 4), ThStatus::Ok);
        let mut sorted = order;
        sorted.sort();
        assert_eq!(sorted, [0, 1, 2, 3]);
        assert!(order[0] == c || order[1] == c);

        let mut mass = [0.0; 4];
        let kernel = CString::new("sublinear:0.5").unwrap();
        assert_eq!(
            th_arrival_posterior(tree, post, label.as_ptr(), 2000, 1, kernel.as_ptr(), mass.as_mut_ptr(), 4),
            ThStatus::Ok
        );
        assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(mass[2], 0.0);
        th_posterior_free(post);
        th_tree_free(tree);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut tree = ptr::null_mut();
        let bad = CString::new("a b\nb c\nc a\n").unwrap();
        assert_eq!(th_tree_parse(bad.as_ptr(), &mut tree), ThStatus::ParseError);
        assert!(tree.is_null());
        assert!(last_error().contains("cycle"), "{}", last_error());
        assert_eq!(th_tree_parse(ptr::null(), &mut tree), ThStatus::NullPointer);
        assert_eq!(th_tree_len(ptr::null()), 0);
        assert!(th_tree_label(ptr::null(), 0).is_null());

        let a = parse("a b\n");
        let b = parse("a b\nb c\n");
        let mut post = ptr::null_mut();
        assert_eq!(th_posterior_new(a, &mut post), ThStatus::Ok);
        let mut x = 0.0;
        assert_eq!(th_posterior_log_hist(b, post, 0, &mut x), ThStatus::Mismatch);
        assert_eq!(th_posterior_log_hist(a, post, 9, &mut x), ThStatus::UnknownNode);
        let missing = CString::new("zz").unwrap();
        let mut v = 0;
        assert_eq!(th_tree_index_of(a, missing.as_ptr(), &mut v), ThStatus::UnknownNode);
        th_posterior_free(post);
        th_tree_free(a);
        th_tree_free(b);
        th_tree_free(ptr::null_mut());
    }
}

#[test]
fn bounds_and_generation() {
    unsafe {
        let mut k = 0;
        assert_eq!(th_bound_k(ThBoundModel::Linear, 0.05, &mut k), ThStatus::Ok);
        assert_eq!(k, 330_258);
        assert_eq!(th_bound_k(ThBoundModel::Uniform, 0.01, &mut k), ThStatus::Ok);
        assert_eq!(k, 1151);

        let kernel = CString::new("linear").unwrap();
        let (mut t1, mut t2) = (ptr::null_mut(), ptr::null_mut());
        let (mut r1, mut r2) = (0, 0);
        assert_eq!(th_tree_generate(kernel.as_ptr(), 500, 3, &mut t1, &mut r1), ThStatus::Ok);
        assert_eq!(th_tree_generate(kernel.as_ptr(), 500, 3, &mut t2, &mut r2), ThStatus::Ok);
        assert_eq!(th_tree_len(t1), 500);
        assert_eq!(r1, r2);
        assert_eq!(
            CStr::from_ptr(th_tree_label(t1, r1)),
            CStr::from_ptr(th_tree_label(t2, r2))
        );
        let nope = CString::new("quadratic").unwrap();
        let mut t3 = ptr::null_mut();
        assert_eq!(th_tree_generate(nope.as_ptr(), 5, 0, &mut t3, &mut r1), ThStatus::InvalidArgument);
        th_tree_free(t1);
        th_tree_free(t2);
    }
}
