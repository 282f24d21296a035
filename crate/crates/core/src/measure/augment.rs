//! Lattice-symmetry augmentation of measurement records.
//!
//! A rectangular grid maps onto itself under a subgroup of the square's
//! dihedral group: all 8 elements for square grids, the 4 axis-preserving
//! ones for proper rectangles (which degrade to 2 for chains). Augmenting a
//! training set with every image teaches the model the symmetry directly.

/// Site permutations for every distinct symmetry of a `rows x cols` grid.
///
/// Each permutation `p` maps original site `i` to transformed position
/// `p[i]`; the identity is always first. Squares get 8 permutations,
/// proper rectangles 4, chains 2, and a single site 1.
pub fn dihedral_images(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let n = rows * cols;
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let swaps: &[bool] = if rows == cols { &[false, true] } else { &[false] };
    for &swap in swaps {
        for flip_r in [false, true] {
            for flip_c in [false, true] {
                let mut p = vec![0usize; n];
                for r in 0..rows {
                    for c in 0..cols {
                        let (mut r2, mut c2) = if swap { (c, r) } else { (r, c) };
                        if flip_r {
                            r2 = rows - 1 - r2;
                        }
                        if flip_c {
                            c2 = cols - 1 - c2;
                        }
                        p[r * cols + c] = r2 * cols + c2;
                    }
                }
                if !perms.contains(&p) {
                    perms.push(p);
                }
            }
        }
    }
    perms
}

/// All symmetry images of one measurement record (identity first).
///
/// Token `i` of the original lands at position `p[i]` of each image.
pub fn augment_record_d4(tokens: &[u8], rows: usize, cols: usize) -> Vec<Vec<u8>> {
    assert_eq!(tokens.len(), rows * cols, "record length vs lattice size");
    dihedral_images(rows, cols)
        .into_iter()
        .map(|p| {
            let mut img = vec![0u8; tokens.len()];
            for (i, &t) in tokens.iter().enumerate() {
                img[p[i]] = t;
            }
            img
        })
        .collect()
}
