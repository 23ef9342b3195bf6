//! Margin dilation: bleeding chart colors outward so filtering near seams
//! never reads the sentinel.

use crate::texture::{Rgb, TextureMap};

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Grows colored texels `pixels` rings outward over the 8-neighborhood.
/// Each new texel takes the mean of its colored neighbors from the previous
/// ring. Validity is unchanged; new texels are flagged as margin.
pub fn dilate_margins(texture: &TextureMap, pixels: usize) -> TextureMap {
    let res = texture.resolution();
    let mut out = texture.clone();
    for _ in 0..pixels {
        let colored: Vec<bool> = (0..res * res).map(|u| out.has_color(u)).collect();
        let mut ring: Vec<(usize, Rgb)> = Vec::new();
        for y in 0..res {
            for x in 0..res {
                let u = y * res + x;
                if colored[u] {
                    continue;
                }
                let mut acc = [0.0f64; 3];
                let mut n = 0;
                for (dx, dy) in NEIGHBORS {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= res as isize || ny >= res as isize {
                        continue;
                    }
                    let v = ny as usize * res + nx as usize;
                    if colored[v] {
                        let c = out.color(v);
                        for k in 0..3 {
                            acc[k] += c[k] as f64;
                        }
                        n += 1;
                    }
                }
                if n > 0 {
                    ring.push((u, acc.map(|a| (a / n as f64) as f32)));
                }
            }
        }
        if ring.is_empty() {
            break;
        }
        for (u, c) in ring {
            out.set_margin(u, c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn zero_is_identity() {
        let t = TextureMap::constant(4, [0.3; 3], [true, false, false, true].repeat(4)).unwrap();
        assert_eq!(dilate_margins(&t, 0), t);
    }

    #[test]
    fn single_texel_colors_its_neighborhood() {
        let mut valid = vec![false; 25];
        valid[12] = true;
        let t = TextureMap::constant(5, [0.7, 0.1, 0.2], valid).unwrap();
        let d = dilate_margins(&t, 1);
        for y in 0..5 {
            for x in 0..5 {
                let u = y * 5 + x;
                let near = (x as isize - 2).abs() <= 1 && (y as isize - 2).abs() <= 1;
                assert_eq!(d.has_color(u), near);
                if near {
                    assert_eq!(d.color(u), [0.7, 0.1, 0.2]);
                }
            }
        }
        assert_eq!(d.valid_count(), 1);
    }

    #[test]
    fn matches_bfs_reach() {
        let res = 16;
        let valid: Vec<bool> = (0..res * res).map(|u| (u * 7919 + 13) % 37 == 0).collect();
        let t = TextureMap::constant(res, [0.5; 3], valid.clone()).unwrap();
        for pixels in [1, 2, 3, 6] {
            let d = dilate_margins(&t, pixels);
            // breadth-first Chebyshev distance from the valid set
            let mut dist = vec![usize::MAX; res * res];
            let mut queue = VecDeque::new();
            for u in 0..res * res {
                if valid[u] {
                    dist[u] = 0;
                    queue.push_back(u);
                }
            }
            while let Some(u) = queue.pop_front() {
                let (x, y) = ((u % res) as isize, (u / res) as isize);
                for (dx, dy) in NEIGHBORS {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < res as isize && ny < res as isize {
                        let v = ny as usize * res + nx as usize;
                        if dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
            }
            for u in 0..res * res {
                assert_eq!(d.has_color(u), dist[u] <= pixels, "texel {u} at {pixels}");
                assert_eq!(d.is_valid(u), valid[u]);
                if d.has_color(u) {
                    assert_eq!(d.color(u), [0.5; 3]);
                }
            }
        }
    }
}
