//! Procedural test meshes: platonic solids, subdivided spheres, noisy
//! "blob" surfaces with many saddle vertices, flat grids.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::Mesh;

fn build(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Mesh {
    Mesh::new(positions, faces).expect("generated mesh is valid")
}

/// Regular icosahedron with unit edge length.
pub fn icosahedron() -> Mesh {
    let (positions, faces) = icosahedron_raw();
    // Raw icosahedron has edge length 2.
    let positions = positions
        .into_iter()
        .map(|p| [p[0] * 0.5, p[1] * 0.5, p[2] * 0.5])
        .collect();
    build(positions, faces)
}

fn icosahedron_raw() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let positions = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, faces)
}

/// Axis-aligned unit cube `[0,1]^3`, two triangles per side.
pub fn unit_cube() -> Mesh {
    let positions = (0..8)
        .map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    build(positions, faces)
}

fn subdivided_sphere(level: u32) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let (mut positions, mut faces) = icosahedron_raw();
    for p in &mut positions {
        *p = normalize(*p);
    }
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = positions[a];
                    let pb = positions[b];
                    positions.push(normalize([
                        pa[0] + pb[0],
                        pa[1] + pb[1],
                        pa[2] + pb[2],
                    ]));
                    positions.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }
    (positions, faces)
}

/// Unit sphere from `level` rounds of icosahedron subdivision
/// (`10·4^level + 2` vertices).
pub fn icosphere(level: u32) -> Mesh {
    let (positions, faces) = subdivided_sphere(level);
    build(positions, faces)
}

/// Deformed icosphere: smooth low-frequency lobes plus seeded radial
/// noise of `noise` times the mean edge length. Noise of a few percent
/// turns roughly half of the vertices into saddles.
pub fn bumpy_sphere(level: u32, noise: f64, seed: u64) -> Mesh {
    blob(level, 0.12, noise, seed)
}

/// Like [`bumpy_sphere`] with explicit lobe amplitude (`0` gives a
/// sphere plus noise only).
pub fn blob(level: u32, lobes: f64, noise: f64, seed: u64) -> Mesh {
    let (mut positions, faces) = subdivided_sphere(level);
    let mean_edge = {
        let f = faces[0];
        let d = |a: usize, b: usize| {
            let (p, q) = (positions[a], positions[b]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        (d(f[0], f[1]) + d(f[1], f[2]) + d(f[2], f[0])) / 3.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut positions {
        let [x, y, z] = *p;
        let smooth = lobes * ((2.0 * x + 0.4).sin() * (3.0 * y).cos() + 0.6 * (2.5 * z - 0.3).sin());
        let jitter = noise * mean_edge * rng.gen_range(-1.0..1.0);
        let r = 1.0 + smooth + jitter;
        *p = [x * r * 1.1, y * r * 0.9, z * r * 1.2];
    }
    build(positions, faces)
}

/// Unit icosphere with isolated saddles planted at sites at least
/// `spacing` edge hops apart: the one-ring of each six-valent site is
/// pushed alternately out and in by `height` mean edge lengths, which
/// raises the site's angle sum above 2π. Site order is seeded.
pub fn studded_sphere(level: u32, spacing: usize, height: f64, seed: u64) -> Mesh {
    let (mut positions, faces) = subdivided_sphere(level);
    let n = positions.len();
    // Cyclic one-rings from consistently oriented faces.
    let mut next: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n];
    for f in &faces {
        for k in 0..3 {
            next[f[k]].insert(f[(k + 1) % 3], f[(k + 2) % 3]);
        }
    }
    let ring = |v: usize| -> Vec<usize> {
        let start = *next[v].keys().min().unwrap();
        let mut out = vec![start];
        let mut cur = next[v][&start];
        while cur != start {
            out.push(cur);
            cur = next[v][&cur];
        }
        out
    };
    let mean_edge = {
        let [a, b, _] = faces[0];
        let (p, q) = (positions[a], positions[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut hops = vec![usize::MAX; n];
    for &site in &order {
        if hops[site] < spacing || next[site].len() != 6 {
            continue;
        }
        for (k, &u) in ring(site).iter().enumerate() {
            let p = positions[u];
            let s = if k % 2 == 0 { 1.0 + height * mean_edge } else { 1.0 - height * mean_edge };
            positions[u] = [p[0] * s, p[1] * s, p[2] * s];
        }
        // Breadth-first hop distances from the new site.
        hops[site] = 0;
        let mut frontier = vec![site];
        for h in 1..spacing {
            let mut grown = Vec::new();
            for &v in &frontier {
                for &u in next[v].keys() {
                    if hops[u] > h {
                        hops[u] = h;
                        grown.push(u);
                    }
                }
            }
            frontier = grown;
        }
    }
    build(positions, faces)
}

/// Torus with `nu × nv` vertices (major radius 1, tube radius `tube`),
/// with the tube radius perturbed by seeded noise of `noise` times the
/// mean edge length. The inner half has negative curvature, so even the
/// noise-free torus has many saddles.
pub fn torus(nu: usize, nv: usize, tube: f64, noise: f64, seed: u64) -> Mesh {
    assert!(nu >= 3 && nv >= 3);
    let tau = 2.0 * std::f64::consts::PI;
    let mean_edge = 0.5 * (tau / nu as f64 + tau * tube / nv as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let a = tau * i as f64 / nu as f64;
        for j in 0..nv {
            let b = tau * j as f64 / nv as f64;
            let r = tube + noise * mean_edge * rng.gen_range(-1.0..1.0);
            let ring = 1.0 + r * b.cos();
            positions.push([ring * a.cos(), ring * a.sin(), r * b.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(positions, faces)
}

/// Planar `nx × ny` grid of squares, each split along one diagonal.
pub fn flat_grid(nx: usize, ny: usize, spacing: f64) -> Mesh {
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push([i as f64 * spacing, j as f64 * spacing, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(positions, faces)
}

/// Fan of `k` equilateral unit triangles around vertex 0 with a zig-zag
/// rim; for `k > 6` the centre is a saddle with angle sum `k·π/3`.
pub fn saddle_fan(k: usize) -> Mesh {
    assert!(k >= 3);
    let c = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / k as f64).cos();
    // Rim points at unit distance from the centre, unit distance apart:
    // (1 - h²)·c + 4h² = 1 for even k.
    let h = if k % 2 == 0 && k > 6 {
        ((1.0 - c) / (4.0 - c)).sqrt()
    } else {
        0.0
    };
    let r = (1.0 - h * h).sqrt();
    let mut positions = vec![[0.0, 0.0, 0.0]];
    for i in 0..k {
        let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        let z = if i % 2 == 0 { h } else { -h };
        positions.push([r * a.cos(), r * a.sin(), z]);
    }
    let faces = (0..k).map(|i| [0, 1 + i, 1 + (i + 1) % k]).collect();
    build(positions, faces)
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}
