//! Detections and non-maximum suppression.

use alloc::vec::Vec;

use crate::bbox::{iou, BBox};

/// One detector output box. `(frame, det_index)` is unique within a sequence
/// and keys the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    pub det_index: u32,
}

/// Greedy non-maximum suppression over a single frame.
///
/// Detections are visited in descending confidence; one is kept iff its IOU
/// with every previously kept detection is at most `thresh`. The result
/// preserves the input order of the survivors.
pub fn nms(dets: &[Detection], thresh: f64) -> Vec<Detection> {
    assert!(thresh > 0.0 && thresh < 1.0, "nms threshold must be in (0,1)");
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // Stable tie-break on det_index keeps the pass deterministic.
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(dets[a].det_index.cmp(&dets[b].det_index))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let redundant = kept.iter().any(|&k| iou(&dets[i].bbox, &dets[k].bbox) > thresh);
        if !redundant {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(idx: u32, cx: f64, cy: f64, conf: f64) -> Detection {
        Detection { frame: 1, bbox: BBox::new(cx, cy, 2.0, 2.0), confidence: conf, det_index: idx }
    }

    #[test]
    fn disjoint_boxes_both_kept() {
        let dets = [det(0, 0.0, 0.0, 0.9), det(1, 10.0, 10.0, 0.8)];
        assert_eq!(nms(&dets, 0.6).len(), 2);
    }

    #[test]
    fn heavy_overlap_keeps_only_the_confident_box() {
        // IOU of these two boxes is 8/12 > 0.6.
        let a = Detection {
            frame: 1,
            bbox: BBox::new(0.0, 0.0, 2.0, 4.0),
            confidence: 0.9,
            det_index: 0,
        };
        let b = Detection {
            frame: 1,
            bbox: BBox::new(0.0, 1.0, 2.0, 4.0),
            confidence: 0.8,
            det_index: 1,
        };
        assert!(iou(&a.bbox, &b.bbox) > 0.6);
        let kept = nms(&[a.clone(), b], 0.6);
        assert_eq!(kept, alloc::vec![a]);
    }

    #[test]
    fn single_detection_kept_unchanged() {
        let d = det(0, 5.0, 5.0, 0.3);
        assert_eq!(nms(core::slice::from_ref(&d), 0.5), alloc::vec![d]);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(nms(&[], 0.5).is_empty());
    }

    proptest! {
        #[test]
        fn output_is_subsequence_with_bounded_pairwise_iou(
            coords in proptest::collection::vec((0.0..20.0f64, 0.0..20.0f64, 0.1..1.0f64), 0..12),
            thresh in 0.1..0.9f64,
        ) {
            let dets: Vec<Detection> = coords
                .iter()
                .enumerate()
                .map(|(i, &(cx, cy, conf))| det(i as u32, cx, cy, conf))
                .collect();
            let kept = nms(&dets, thresh);

            // Subsequence of the input.
            let mut cursor = 0;
            for k in &kept {
                let pos = dets[cursor..].iter().position(|d| d == k);
                prop_assert!(pos.is_some());
                cursor += pos.unwrap() + 1;
            }

            for (i, a) in kept.iter().enumerate() {
                for b in kept.iter().skip(i + 1) {
                    prop_assert!(iou(&a.bbox, &b.bbox) <= thresh);
                }
            }
        }
    }
}
