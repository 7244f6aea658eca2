use proptest::prelude::*;
use rotinv_core::datasets::synth_survey_image;
use rotinv_core::imgcore::{gravity_center, GrayImage};
use rotinv_core::preprocess::{
    dilate, erode_with_border, gz2_features, gz2_normalize, histogram, laplacian_pyramid, otsu_bin, otsu_threshold, BinaryMask,
    StructuringElement, PYRAMID_LEVELS,
};
use rotinv_core::Descriptor;

/// Threshold maximizing the between-class variance, found by trying all 255
/// splits with exact rational arithmetic; ties keep the lowest bin.
fn otsu_exhaustive(hist: &[u64; 256]) -> Option<u8> {
    let n: i128 = hist.iter().map(|&c| c as i128).sum();
    let total: i128 = hist.iter().enumerate().map(|(i, &c)| i as i128 * c as i128).sum();
    let mut best: Option<(u8, i128, i128)> = None;
    let (mut n0, mut s0) = (0i128, 0i128);
    for t in 0..255usize {
        n0 += hist[t] as i128;
        s0 += t as i128 * hist[t] as i128;
        let n1 = n - n0;
        let s1 = total - s0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // between-class variance up to the common factor 1/N^2: (n1 s0 - n0 s1)^2 / (n0 n1)
        let d = n1 * s0 - n0 * s1;
        let (num, den) = (d * d, n0 * n1);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|b| b.0)
}

fn mask(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |bits| BinaryMask::from_fn(w, h, |x, y| bits[y * w + x]))
}

fn element() -> impl Strategy<Value = StructuringElement> {
    prop_oneof![
        (1usize..4).prop_map(|r| StructuringElement::square(2 * r + 1)),
        (1usize..4).prop_map(StructuringElement::disk),
    ]
}

/// Brute-force dilation over the symmetric element given as offsets.
fn dilate_oracle(m: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        offsets.iter().any(|&(dx, dy)| {
            let (sx, sy) = (x as isize + dx, y as isize + dy);
            sx >= 0 && sy >= 0 && (sx as usize) < m.width() && (sy as usize) < m.height() && m.get(sx as usize, sy as usize)
        })
    })
}

fn offsets(se: &StructuringElement) -> Vec<(isize, isize)> {
    // probe the element by dilating a single point in a large frame
    let n = 21;
    let mut point = BinaryMask::new(n, n);
    point.set(10, 10, true);
    let d = dilate(&point, se);
    let mut out = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if d.get(x, y) {
                out.push((x as isize - 10, y as isize - 10));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn otsu_matches_exhaustive_search(levels in prop::collection::vec(any::<u8>(), 2..400)) {
        let img = GrayImage::from_vec(levels.len(), 1, levels.iter().map(|&l| l as f64 / 255.0).collect()).unwrap();
        let hist = histogram(&img);
        match otsu_exhaustive(&hist) {
            Some(t) => {
                prop_assert_eq!(otsu_bin(&hist).unwrap(), t);
                prop_assert!((otsu_threshold(&img).unwrap() - t as f64 / 255.0).abs() < 1e-12);
            }
            None => prop_assert!(otsu_bin(&hist).is_err()),
        }
    }

    #[test]
    fn dilation_matches_brute_force_and_erosion_is_dual(m in (1usize..16, 1usize..16).prop_flat_map(|(w, h)| mask(w, h)), se in element()) {
        let offs = offsets(&se);
        let d = dilate(&m, &se);
        prop_assert_eq!(&d, &dilate_oracle(&m, &offs));
        // complement of the dilation = erosion of the complement, whose outside is foreground
        prop_assert_eq!(d.complement(), erode_with_border(&m.complement(), &se, true));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pyramid_reconstructs_input(w in 4usize..40, h in 4usize..40, seed in any::<u64>(), levels in 1usize..6, sigma in 0.5f64..3.0) {
        let mut s = seed;
        let img = GrayImage::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        });
        let pyr = laplacian_pyramid(&img, levels, sigma).unwrap();
        prop_assert_eq!(pyr.levels.len(), levels);
        let err = pyr.reconstruct().data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{}", err);
    }
}

#[test]
fn survey_images_normalize_to_centered_frames() {
    for (i, spiral) in [false, true, false, true].into_iter().enumerate() {
        let raw = synth_survey_image(spiral, 100 + i as u64);
        let n = gz2_normalize(&raw).unwrap();
        assert_eq!((n.width(), n.height()), (64, 64));
        let c = gravity_center(&n).unwrap();
        assert!((c.cx - 31.5).abs() < 0.5 && (c.cy - 31.5).abs() < 0.5, "{c:?}");
        let f = gz2_features(&raw, &Descriptor::ring()).unwrap();
        assert_eq!(f.len(), PYRAMID_LEVELS * 40);
        assert!(f.is_finite());
    }
}
