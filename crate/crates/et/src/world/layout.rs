//! Procedural wall layouts.
//!
//! A layout id deterministically fixes the wall/counter pattern; object
//! placement and agent start vary per episode seed on top of it.

use rand_chacha::ChaCha8Rng;

use super::Terrain;
use crate::rng;

/// Terrain grid for a layout id: border walls plus a few counter runs and
/// wall stubs, guaranteed floor-connected.
pub fn build_terrain(width: i32, height: i32, layout_id: u32) -> Vec<Terrain> {
    let mut attempt = 0u64;
    loop {
        let seed = rng::derive(layout_id as u64 ^ (attempt << 32), "layout");
        let mut r = rng::seeded(seed);
        let terrain = try_build(width, height, &mut r);
        if connected(&terrain, width, height) {
            return terrain;
        }
        attempt += 1;
    }
}

fn try_build(width: i32, height: i32, r: &mut ChaCha8Rng) -> Vec<Terrain> {
    let mut t = vec![Terrain::Floor; (width * height) as usize];
    let mut set = |t: &mut Vec<Terrain>, x: i32, y: i32, v: Terrain| {
        if x >= 0 && x < width && y >= 0 && y < height {
            t[(y * width + x) as usize] = v;
        }
    };
    for x in 0..width {
        set(&mut t, x, 0, Terrain::Wall);
        set(&mut t, x, height - 1, Terrain::Wall);
    }
    for y in 0..height {
        set(&mut t, 0, y, Terrain::Wall);
        set(&mut t, width - 1, y, Terrain::Wall);
    }

    // Counter runs hug the interior; wall stubs jut from the border.
    let runs = 2 + rng::index(r, 2);
    for _ in 0..runs {
        let horizontal = rng::uniform(r) < 0.5;
        let len = 3 + rng::index(r, 3) as i32;
        let x = 2 + rng::index(r, (width - 4).max(1) as usize) as i32;
        let y = 2 + rng::index(r, (height - 4).max(1) as usize) as i32;
        for k in 0..len {
            let (cx, cy) = if horizontal { (x + k, y) } else { (x, y + k) };
            if cx > 1 && cx < width - 2 && cy > 1 && cy < height - 2 {
                set(&mut t, cx, cy, Terrain::Counter);
            }
        }
    }
    let stubs = 1 + rng::index(r, 2);
    for _ in 0..stubs {
        let len = 2 + rng::index(r, 2) as i32;
        let side = rng::index(r, 4);
        let offset = 2 + rng::index(r, (width - 4).max(1) as usize) as i32;
        for k in 1..=len {
            let (x, y) = match side {
                0 => (offset, k),
                1 => (offset, height - 1 - k),
                2 => (k, offset),
                _ => (width - 1 - k, offset),
            };
            if x > 0 && x < width - 1 && y > 0 && y < height - 1 {
                set(&mut t, x, y, Terrain::Wall);
            }
        }
    }
    t
}

/// Flood fill over floor cells.
pub fn connected(terrain: &[Terrain], width: i32, height: i32) -> bool {
    let floor: Vec<usize> = terrain
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == Terrain::Floor)
        .map(|(i, _)| i)
        .collect();
    let Some(&start) = floor.first() else {
        return false;
    };
    let mut seen = vec![false; terrain.len()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i as i32) % width, (i as i32) / width);
        for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || nx >= width || ny < 0 || ny >= height {
                continue;
            }
            let j = (ny * width + nx) as usize;
            if !seen[j] && terrain[j] == Terrain::Floor {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == floor.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_are_deterministic_and_connected() {
        for id in 0..10 {
            let a = build_terrain(13, 13, id);
            let b = build_terrain(13, 13, id);
            assert_eq!(a, b);
            assert!(connected(&a, 13, 13));
        }
        assert_ne!(build_terrain(13, 13, 0), build_terrain(13, 13, 1));
    }
}
