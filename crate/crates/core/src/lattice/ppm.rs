use super::{neighborhood_size, Configuration, Dim, NeighborCounts};

/// Binary PPM (P6) of one 2D slice: rows follow the first coordinate, columns
/// the second. Alpha nodes are drawn on the red channel and beta nodes on the
/// green channel, brighter the more same-type nodes sit in the neighbourhood:
/// `128 + 127 * same / |N(u)|`.
///
/// `slice` selects the third coordinate for 3D configurations and is ignored in 2D.
pub fn ppm_frame(config: &Configuration, counts: &NeighborCounts, slice: usize) -> Vec<u8> {
    let p = config.params();
    let n = p.n;
    let size = neighborhood_size(p) as u32;
    let header = format!("P6\n{n} {n}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * n * n);
    out.extend_from_slice(header.as_bytes());
    let torus = config.torus();
    for x in 0..n {
        for y in 0..n {
            let idx = match p.dim {
                Dim::Two => torus.index([x, y, 0]),
                Dim::Three => torus.index([x, y, slice]),
            };
            let alpha = counts.get(idx);
            let ty = config.get(idx);
            let same = if ty.is_alpha() { alpha } else { size - alpha };
            let shade = (128 + 127 * same / size) as u8;
            if ty.is_alpha() {
                out.extend_from_slice(&[shade, 0, 0]);
            } else {
                out.extend_from_slice(&[0, shade, 0]);
            }
        }
    }
    out
}

/// One frame in 2D, one frame per z-slice in 3D.
pub fn ppm_frames(config: &Configuration, counts: &NeighborCounts) -> Vec<Vec<u8>> {
    match config.params().dim {
        Dim::Two => vec![ppm_frame(config, counts, 0)],
        Dim::Three => (0..config.params().n).map(|z| ppm_frame(config, counts, z)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_counts, random_config, ModelParams, NodeType};

    #[test]
    fn header_and_shading() {
        let p = ModelParams::two_d(8, 1, "0.5", "0.5").unwrap();
        let mut c = Configuration::uniform(p, NodeType::Beta);
        c.set(0, NodeType::Alpha);
        let counts = build_counts(&c);
        let img = ppm_frame(&c, &counts, 0);
        let header = b"P6\n8 8\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert_eq!(img.len(), header.len() + 3 * 64);
        let px = &img[header.len()..];
        // lone alpha at the origin: 1 same-type node out of 9
        assert_eq!(&px[0..3], &[128 + 127 / 9, 0, 0]);
        // its neighbour (0,1) is beta with 8 of 9 beta
        assert_eq!(&px[3..6], &[0, (128 + 127 * 8 / 9) as u8, 0]);
        // far away beta: fully surrounded
        let far = 3 * (4 * 8 + 4);
        assert_eq!(&px[far..far + 3], &[0, 255, 0]);
    }

    #[test]
    fn three_d_emits_one_frame_per_slice() {
        let p = ModelParams::three_d(9, 1, "0.5", "0.5").unwrap();
        let c = random_config(&p, 1).unwrap();
        let frames = ppm_frames(&c, &build_counts(&c));
        assert_eq!(frames.len(), 9);
        assert!(frames.iter().all(|f| f.len() == 11 + 3 * 81));
    }
}
