use ndarray::Array3;
use proptest::prelude::*;

use textscrub::destroy::{latent_replace, noise_fill};
use textscrub::diffusion::{ddim_denoise_step, ddim_invert_step, Schedule};
use textscrub::imageops::{max_pool, upsample_blocks};
use textscrub::localize::{dilate, extract_boxes, finalize_mask};
use textscrub::metrics::{psnr, psnr_masked, PSNR_CAP_DB};
use textscrub::tensor::{Image, LatentTensor, Mask};

fn mask_strategy(h: usize, w: usize) -> impl Strategy<Value = Mask> {
    proptest::collection::vec(any::<bool>(), h * w)
        .prop_map(move |bits| Mask::from_fn(h, w, |y, x| bits[y * w + x]))
}

fn latent_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = LatentTensor> {
    proptest::collection::vec(-4.0f64..4.0, c * h * w)
        .prop_map(move |v| LatentTensor::new(Array3::from_shape_vec((c, h, w), v).unwrap()).unwrap())
}

fn image_strategy(h: usize, w: usize) -> impl Strategy<Value = Image> {
    proptest::collection::vec(0.0f64..255.0, 3 * h * w)
        .prop_map(move |v| Image::new(Array3::from_shape_vec((h, w, 3), v).unwrap()).unwrap())
}

proptest! {
    #[test]
    fn denoise_inverts_inversion(
        z in latent_strategy(2, 3, 3),
        eps in latent_strategy(2, 3, 3),
        t in 1usize..=50,
    ) {
        let s = Schedule::default_for(50).unwrap();
        let up = ddim_invert_step(&z, &eps, t, &s).unwrap();
        let back = ddim_denoise_step(&up, &eps, t, &s).unwrap();
        prop_assert!(back.max_abs_diff(&z) < 1e-9);
    }

    #[test]
    fn dilation_is_extensive_and_monotone(a in mask_strategy(9, 11), b in mask_strategy(9, 11), k in 0usize..4) {
        let k = 2 * k + 1;
        let da = dilate(&a, k).unwrap();
        prop_assert!(a.is_subset_of(&da));
        let ab = a.and(&b).unwrap();
        prop_assert!(dilate(&ab, k).unwrap().is_subset_of(&da));
        prop_assert_eq!(dilate(&a, 1).unwrap(), a);
    }

    #[test]
    fn boxes_cover_every_pixel_without_overlap(m in mask_strategy(12, 12)) {
        let boxes = extract_boxes(&m, 1);
        for y in 0..12 {
            for x in 0..12 {
                if m.get(y, x) {
                    prop_assert!(boxes.iter().any(|b| b.contains(y, x)));
                }
            }
        }
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                prop_assert!(!a.intersects(b));
            }
        }
    }

    #[test]
    fn final_mask_nests_in_stage_one(
        m1 in mask_strategy(8, 8),
        a in mask_strategy(8, 8),
        b in mask_strategy(8, 8),
    ) {
        let (m3, latent) = finalize_mask(&m1, &[a, b], 4).unwrap();
        prop_assert!(m3.is_subset_of(&m1));
        prop_assert_eq!(latent.size(), (2, 2));
        prop_assert!(m3.is_subset_of(&upsample_blocks(&latent, 4)));
        prop_assert_eq!(max_pool(&m3, 4), latent);
    }

    #[test]
    fn replacement_is_idempotent_and_exact_outside(
        edit in latent_strategy(3, 4, 5),
        src in latent_strategy(3, 4, 5),
        m in mask_strategy(4, 5),
    ) {
        let once = latent_replace(&edit, &src, &m).unwrap();
        prop_assert_eq!(&latent_replace(&once, &src, &m).unwrap(), &once);
        for c in 0..3 {
            for y in 0..4 {
                for x in 0..5 {
                    let want = if m.get(y, x) { edit.data()[[c, y, x]] } else { src.data()[[c, y, x]] };
                    prop_assert_eq!(once.data()[[c, y, x]].to_bits(), want.to_bits());
                }
            }
        }
    }

    #[test]
    fn noise_fill_leaves_the_outside_alone(z in latent_strategy(2, 5, 5), m in mask_strategy(5, 5), seed in any::<u64>()) {
        let filled = noise_fill(&z, &m, seed, 1e-6).unwrap();
        for c in 0..2 {
            for y in 0..5 {
                for x in 0..5 {
                    if !m.get(y, x) {
                        prop_assert_eq!(filled.data()[[c, y, x]].to_bits(), z.data()[[c, y, x]].to_bits());
                    }
                }
            }
        }
        prop_assert_eq!(noise_fill(&z, &m, seed, 1e-6).unwrap(), filled);
    }

    #[test]
    fn psnr_is_symmetric_and_capped(a in image_strategy(6, 6), b in image_strategy(6, 6)) {
        let ab = psnr(&a, &b).unwrap();
        prop_assert_eq!(ab, psnr(&b, &a).unwrap());
        prop_assert!(ab <= PSNR_CAP_DB);
        prop_assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        prop_assert_eq!(psnr_masked(&a, &b, &Mask::empty(6, 6)).unwrap(), ab);
    }
}
