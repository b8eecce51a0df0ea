use std::collections::VecDeque;

use super::SuppressionError;
use crate::mask::BinaryMask;

const N4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn step(w: usize, h: usize, i: usize, (dx, dy): (isize, isize)) -> Option<usize> {
    let x = (i % w) as isize + dx;
    let y = (i / w) as isize + dy;
    (x >= 0 && y >= 0 && x < w as isize && y < h as isize).then(|| y as usize * w + x as usize)
}

/// Sets every background pixel that is not 4-connected to a border
/// background pixel.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    let bits = m.bits();
    let mut outside = vec![false; bits.len()];
    let mut queue = VecDeque::new();
    let border = (0..w)
        .flat_map(|x| [x, (h - 1) * w + x])
        .chain((0..h).flat_map(|y| [y * w, y * w + w - 1]));
    for i in border {
        if !bits[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for d in N4 {
            if let Some(j) = step(w, h, i, d) {
                if !bits[j] && !outside[j] {
                    outside[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    BinaryMask::new(w, h, outside.into_iter().map(|o| !o).collect()).expect("same dims")
}

/// 8-connected foreground components, in order of their first row-major pixel.
///
/// Returns a label per pixel (`usize::MAX` for background) and each
/// component's pixel count.
pub fn label_components(m: &BinaryMask) -> (Vec<usize>, Vec<usize>) {
    let (w, h) = m.dims();
    let bits = m.bits();
    let mut labels = vec![usize::MAX; bits.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || labels[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            for d in N8 {
                if let Some(j) = step(w, h, i, d) {
                    if bits[j] && labels[j] == usize::MAX {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest 8-connected component; ties go to the component
/// whose first pixel comes first in row-major order.
pub fn largest_component(m: &BinaryMask) -> Result<BinaryMask, SuppressionError> {
    let (labels, sizes) = label_components(m);
    let mut best: Option<usize> = None;
    for (label, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|b| size > sizes[b]) {
            best = Some(label);
        }
    }
    let keep = best.ok_or(SuppressionError::EmptyMask)?;
    Ok(BinaryMask::new(m.width(), m.height(), labels.iter().map(|&l| l == keep).collect())
        .expect("same dims"))
}

/// Keeps every component with at least `fraction * width * height` pixels.
pub fn components_above(m: &BinaryMask, fraction: f64) -> Result<BinaryMask, SuppressionError> {
    let (labels, sizes) = label_components(m);
    let min_area = fraction * m.len() as f64;
    let kept: Vec<bool> = sizes.iter().map(|&s| s as f64 >= min_area).collect();
    let out = BinaryMask::new(
        m.width(),
        m.height(),
        labels.iter().map(|&l| l != usize::MAX && kept[l]).collect(),
    )
    .expect("same dims");
    if !out.any() {
        return Err(SuppressionError::EmptyMask);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_rows(rows: &[&str]) -> BinaryMask {
        BinaryMask::from_fn(rows[0].len(), rows.len(), |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn ring_becomes_solid() {
        let ring = from_rows(&[".......", "..###..", ".#...#.", ".#...#.", ".#...#.", "..###..", "......."]);
        let disk = from_rows(&[".......", "..###..", ".#####.", ".#####.", ".#####.", "..###..", "......."]);
        assert_eq!(fill_holes(&ring), disk);
    }

    #[test]
    fn open_channel_is_not_a_hole() {
        let m = from_rows(&["#####", "#...#", "#...#", "#...#", "##.##"]);
        assert_eq!(fill_holes(&m), m);
    }

    #[test]
    fn diagonal_leak_does_not_count_as_open() {
        // interior touches the outside only diagonally, which 4-connectivity ignores
        let m = from_rows(&[".....", ".###.", ".#.#.", ".##..", "....."]);
        let filled = from_rows(&[".....", ".###.", ".###.", ".##..", "....."]);
        assert_eq!(fill_holes(&m), filled);
    }

    #[test]
    fn all_true_is_fixpoint() {
        let m = BinaryMask::filled(4, 3, true);
        assert_eq!(fill_holes(&m), m);
    }

    #[test]
    fn keeps_largest() {
        let m = from_rows(&["##.....", "##.....", "#...###", "......."]);
        let only = from_rows(&["##.....", "##.....", "#......", "......."]);
        assert_eq!(largest_component(&m).unwrap(), only);
    }

    #[test]
    fn tie_goes_to_first_pixel() {
        // two 4-pixel blobs, first pixels at row-major indices 7 and 30
        let mut bits = vec![false; 10 * 6];
        for i in [7, 8, 17, 18, 30, 31, 40, 41] {
            bits[i] = true;
        }
        let m = BinaryMask::new(10, 6, bits).unwrap();
        let kept = largest_component(&m).unwrap();
        assert!(kept.bits()[7] && !kept.bits()[30]);
        assert_eq!(kept.count(), 4);
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let m = from_rows(&["#..", ".#.", "..#"]);
        assert_eq!(largest_component(&m).unwrap(), m);
        assert_eq!(
            largest_component(&BinaryMask::filled(3, 3, false)),
            Err(SuppressionError::EmptyMask)
        );
    }

    #[test]
    fn area_fraction_keeps_big_blobs() {
        let m = from_rows(&["##..#", "##...", ".....", "...##"]);
        let kept = components_above(&m, 0.1).unwrap();
        assert_eq!(kept, from_rows(&["##...", "##...", ".....", "...##"]));
        assert_eq!(components_above(&m, 0.5), Err(SuppressionError::EmptyMask));
    }

    /// Fixpoint oracle: grow the outside region one 4-neighbour step at a
    /// time until nothing changes.
    fn fill_oracle(m: &BinaryMask) -> BinaryMask {
        let (w, h) = m.dims();
        let mut outside = BinaryMask::from_fn(w, h, |x, y| {
            !m.get(x, y) && (x == 0 || y == 0 || x == w - 1 || y == h - 1)
        });
        loop {
            let next = BinaryMask::from_fn(w, h, |x, y| {
                outside.get(x, y)
                    || (!m.get(x, y)
                        && ((x > 0 && outside.get(x - 1, y))
                            || (x + 1 < w && outside.get(x + 1, y))
                            || (y > 0 && outside.get(x, y - 1))
                            || (y + 1 < h && outside.get(x, y + 1))))
            });
            if next == outside {
                return outside.complement();
            }
            outside = next;
        }
    }

    proptest! {
        #[test]
        fn fill_matches_oracle(m in crate::suppression::morphology::tests::random_mask()) {
            let f = fill_holes(&m);
            prop_assert_eq!(&f, &fill_oracle(&m));
            prop_assert!(m.is_subset_of(&f));
            prop_assert_eq!(fill_holes(&f), f);
        }
    }
}
