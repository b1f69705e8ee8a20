//! Binary morphology over flat square structuring elements.
//!
//! Erosion is a windowed minimum, dilation a windowed maximum, both with
//! zero padding: pixels beyond the border count as background, so erosion
//! eats into foreground touching the frame edge and dilation grows past it.
//!
//! `preprocess` decomposes a mask into the pair that the synthesis stage
//! consumes: interior = erode(mask), edge = interior XOR dilate(mask). With
//! erode ⊆ dilate this makes the edge a ring around the body, disjoint from
//! the interior by construction.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind, StructuringElement};

fn require_binary(mask: &Grid, context: &str) -> Result<()> {
    if !mask.is_binary() {
        return Err(Error::NonBinaryInput {
            context: context.into(),
        });
    }
    Ok(())
}

pub fn erode(mask: &Grid, se: StructuringElement) -> Result<Grid> {
    require_binary(mask, "erode")?;
    let r = se.radius();
    let mut out = Grid::zeros(mask.height(), mask.width(), GridKind::Binary);
    for row in 0..mask.height() as isize {
        'pixel: for col in 0..mask.width() as isize {
            for dr in -r..=r {
                for dc in -r..=r {
                    if mask.get_padded(row + dr, col + dc) == 0.0 {
                        continue 'pixel;
                    }
                }
            }
            out.set(row as usize, col as usize, 1.0);
        }
    }
    Ok(out)
}

pub fn dilate(mask: &Grid, se: StructuringElement) -> Result<Grid> {
    require_binary(mask, "dilate")?;
    let r = se.radius();
    let mut out = Grid::zeros(mask.height(), mask.width(), GridKind::Binary);
    for row in 0..mask.height() as isize {
        'pixel: for col in 0..mask.width() as isize {
            for dr in -r..=r {
                for dc in -r..=r {
                    if mask.get_padded(row + dr, col + dc) == 1.0 {
                        out.set(row as usize, col as usize, 1.0);
                        continue 'pixel;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Edge/interior decomposition of one silhouette mask.
#[derive(Debug, Clone)]
pub struct EdgeInteriorPair {
    pub edge: Grid,
    pub interior: Grid,
}

pub fn preprocess(mask: &Grid, se: StructuringElement) -> Result<EdgeInteriorPair> {
    require_binary(mask, "preprocess")?;
    let interior = erode(mask, se)?;
    let dilated = dilate(mask, se)?;
    let mut edge = Grid::zeros(mask.height(), mask.width(), GridKind::Binary);
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            let a = interior.get(row, col);
            let b = dilated.get(row, col);
            if a != b {
                edge.set(row, col, 1.0);
            }
        }
    }
    Ok(EdgeInteriorPair { edge, interior })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: direct double-loop min/max filter over the window,
    // written against the definition rather than the implementation above.
    fn filter_oracle(mask: &Grid, size: usize, take_max: bool) -> Grid {
        let r = (size / 2) as isize;
        let mut out = Grid::zeros(mask.height(), mask.width(), GridKind::Binary);
        for row in 0..mask.height() {
            for col in 0..mask.width() {
                let mut acc = if take_max { 0.0f64 } else { 1.0f64 };
                for dr in -r..=r {
                    for dc in -r..=r {
                        let v = mask.get_padded(row as isize + dr, col as isize + dc);
                        acc = if take_max { acc.max(v) } else { acc.min(v) };
                    }
                }
                out.set(row, col, acc);
            }
        }
        out
    }

    pub(crate) fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Grid {
        let values = (0..h * w)
            .map(|_| if rng.random_bool(density) { 1.0 } else { 0.0 })
            .collect();
        Grid::binary(h, w, values).unwrap()
    }

    fn centered_square(canvas: usize, side: usize) -> Grid {
        let mut g = Grid::zeros(canvas, canvas, GridKind::Binary);
        let start = (canvas - side) / 2;
        for r in start..start + side {
            for c in start..start + side {
                g.set(r, c, 1.0);
            }
        }
        g
    }

    #[test]
    fn erode_shrinks_a_square_by_the_radius() {
        // 5x5 centered square in 7x7, 3x3 element -> 3x3 interior.
        let g = centered_square(7, 5);
        let se = StructuringElement::new(3).unwrap();
        let eroded = erode(&g, se).unwrap();
        assert_eq!(eroded, centered_square(7, 3));
    }

    #[test]
    fn dilate_grows_a_single_pixel_to_the_element() {
        let mut g = Grid::zeros(5, 5, GridKind::Binary);
        g.set(2, 2, 1.0);
        let se = StructuringElement::new(3).unwrap();
        let dilated = dilate(&g, se).unwrap();
        assert_eq!(dilated, centered_square(5, 3));
    }

    #[test]
    fn zero_padding_erodes_content_at_the_border() {
        // A full-frame mask loses its outermost ring: the window sees
        // background beyond the edge.
        let g = centered_square(4, 4);
        let se = StructuringElement::new(3).unwrap();
        let eroded = erode(&g, se).unwrap();
        assert_eq!(eroded, centered_square(4, 2));
    }

    #[test]
    fn preprocess_of_a_centered_square_gives_a_ring() {
        // 7x7 square in 11x11 with a 3x3 element: interior is the 5x5 core,
        // edge is the 2-thick ring between the 9x9 dilation and the core.
        let g = centered_square(11, 7);
        let se = StructuringElement::new(3).unwrap();
        let pair = preprocess(&g, se).unwrap();
        assert_eq!(pair.interior, centered_square(11, 5));
        let dilated = centered_square(11, 9);
        for r in 0..11 {
            for c in 0..11 {
                let expect = if dilated.get(r, c) == 1.0 && pair.interior.get(r, c) == 0.0 {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(pair.edge.get(r, c), expect, "at ({r},{c})");
            }
        }
        assert_eq!(pair.edge.count_foreground(), 81 - 25);
    }

    #[test]
    fn all_zero_mask_yields_empty_edge_and_interior() {
        let g = Grid::zeros(6, 6, GridKind::Binary);
        let se = StructuringElement::new(3).unwrap();
        let pair = preprocess(&g, se).unwrap();
        assert_eq!(pair.edge.count_foreground(), 0);
        assert_eq!(pair.interior.count_foreground(), 0);
    }

    #[test]
    fn float_input_is_rejected() {
        let g = Grid::float(2, 2, vec![0.3; 4]).unwrap();
        let se = StructuringElement::new(3).unwrap();
        assert!(matches!(
            erode(&g, se).unwrap_err(),
            Error::NonBinaryInput { .. }
        ));
        assert!(matches!(
            dilate(&g, se).unwrap_err(),
            Error::NonBinaryInput { .. }
        ));
        assert!(matches!(
            preprocess(&g, se).unwrap_err(),
            Error::NonBinaryInput { .. }
        ));
    }

    #[test]
    fn matches_the_min_max_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mask = random_mask(&mut rng, 16, 16, 0.45);
            for size in [3usize, 5] {
                let se = StructuringElement::new(size).unwrap();
                assert_eq!(erode(&mask, se).unwrap(), filter_oracle(&mask, size, false));
                assert_eq!(dilate(&mask, se).unwrap(), filter_oracle(&mask, size, true));
            }
        }
    }

    proptest! {
        #[test]
        fn erosion_is_a_subset_and_dilation_a_superset(
            seed in any::<u64>(),
            size in prop::sample::select(vec![3usize, 5, 7]),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = random_mask(&mut rng, 12, 12, 0.5);
            let se = StructuringElement::new(size).unwrap();
            let eroded = erode(&mask, se).unwrap();
            let dilated = dilate(&mask, se).unwrap();
            for r in 0..12 {
                for c in 0..12 {
                    prop_assert!(eroded.get(r, c) <= mask.get(r, c));
                    prop_assert!(mask.get(r, c) <= dilated.get(r, c));
                }
            }
        }

        #[test]
        fn edge_and_interior_are_disjoint_and_their_union_is_the_dilation(
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = random_mask(&mut rng, 12, 12, 0.5);
            let se = StructuringElement::new(3).unwrap();
            let pair = preprocess(&mask, se).unwrap();
            let dilated = dilate(&mask, se).unwrap();
            for r in 0..12 {
                for c in 0..12 {
                    let e = pair.edge.get(r, c);
                    let i = pair.interior.get(r, c);
                    prop_assert!(e * i == 0.0, "overlap at ({}, {})", r, c);
                    prop_assert_eq!(e + i, dilated.get(r, c));
                }
            }
        }

        // Growing the element grows the edge band on both sides, so the edge
        // pixel count is non-decreasing in the element size.
        #[test]
        fn edge_count_is_monotone_in_element_size(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = random_mask(&mut rng, 16, 16, 0.5);
            let mut last = 0usize;
            for size in [3usize, 5, 7, 9] {
                let se = StructuringElement::new(size).unwrap();
                let pair = preprocess(&mask, se).unwrap();
                let count = pair.edge.count_foreground();
                prop_assert!(count >= last, "edge shrank from {} to {} at size {}", last, count, size);
                last = count;
            }
        }
    }
}
