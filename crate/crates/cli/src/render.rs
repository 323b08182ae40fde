//! Chaos-game pictures.
//!
//! The circle is drawn as a one-pixel ring, the interval as a horizontal strip
//! (each point lights a short vertical bar), and the sphere in orthographic
//! projection along `z`: the near hemisphere `z ≥ 0` in white, the far one in
//! grey.

use ifs_lab::{Error, IfsSystem, Space, SpacePoint, WordStream};

use crate::report::Image;

const INK: [u8; 3] = [255, 255, 255];
const FAR_SIDE: [u8; 3] = [110, 110, 110];

/// Radius of the circle ring / sphere disk, in pixels.
pub fn disk_radius(width: usize, height: usize) -> f64 {
    0.45 * (width.min(height) as f64 - 1.0)
}

fn centre(width: usize, height: usize) -> (f64, f64) {
    ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
}

/// Pixel lit by angle `theta` on the ring.
pub fn ring_pixel(theta: f64, width: usize, height: usize) -> (usize, usize) {
    let (cx, cy) = centre(width, height);
    let r = disk_radius(width, height);
    ((cx + r * theta.cos()).round() as usize, (cy - r * theta.sin()).round() as usize)
}

fn plot(img: &mut Image, p: &SpacePoint) {
    let (w, h) = (img.width, img.height);
    match *p {
        SpacePoint::Circle(t) => {
            let (x, y) = ring_pixel(t, w, h);
            img.set(x, y, INK);
        }
        SpacePoint::Interval(t) => {
            let x = (t * (w as f64 - 1.0)).round() as usize;
            let band = (h / 8).max(1);
            for y in h / 2 - band / 2..h / 2 - band / 2 + band {
                img.set(x, y, INK);
            }
        }
        SpacePoint::Sphere2([vx, vy, vz]) => {
            let (cx, cy) = centre(w, h);
            let r = disk_radius(w, h);
            let x = (cx + r * vx).round() as usize;
            let y = (cy - r * vy).round() as usize;
            if vz >= 0.0 {
                img.set(x, y, INK);
            } else if img.get(x.min(w - 1), y.min(h - 1)) != INK {
                img.set(x, y, FAR_SIDE);
            }
        }
        SpacePoint::Grid(_) => {}
    }
}

/// Plots `steps` orbit points of `x` after `burn_in` unplotted steps, along
/// the branch drawn from stream 0 of `seed`.
pub fn render_attractor(
    sys: &IfsSystem,
    x: &SpacePoint,
    seed: u64,
    steps: usize,
    burn_in: usize,
    width: usize,
    height: usize,
) -> ifs_lab::Result<Image> {
    if matches!(sys.space(), Space::FiniteGrid(_)) {
        return Err(Error::Unsupported("rendering a finite grid".into()));
    }
    sys.space().check(x)?;
    let mut img = Image::blank("attractor", width, height);
    let mut word = WordStream::for_trial(sys.weights().clone(), seed, 0);
    let mut cur = *x;
    for _ in 0..burn_in {
        cur = sys.apply(word.next_symbol(), &cur)?;
    }
    for _ in 0..steps {
        cur = sys.apply(word.next_symbol(), &cur)?;
        plot(&mut img, &cur);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ifs_lab::MapDescriptor;

    #[test]
    fn zero_steps_is_blank() {
        let sys = IfsSystem::uniform(Space::Circle, vec![MapDescriptor::rotation(1.0).unwrap()]).unwrap();
        let img = render_attractor(&sys, &SpacePoint::circle(0.0), 1, 0, 100, 32, 32).unwrap();
        assert!(img.pixels.iter().all(|p| *p == [0, 0, 0]));
    }

    #[test]
    fn grids_are_not_rendered() {
        let g = Space::grid(3).unwrap();
        let sys = IfsSystem::uniform(g, vec![MapDescriptor::identity(&g)]).unwrap();
        assert!(matches!(
            render_attractor(&sys, &SpacePoint::Grid(0), 1, 10, 0, 8, 8),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn interval_and_sphere_draw_something() {
        let half = IfsSystem::uniform(
            Space::Interval,
            vec![MapDescriptor::affine(0.5, 0.0).unwrap(), MapDescriptor::affine(0.5, 0.5).unwrap()],
        )
        .unwrap();
        let img = render_attractor(&half, &SpacePoint::Interval(0.3), 2, 2000, 10, 64, 16).unwrap();
        assert!(img.pixels.iter().filter(|p| **p == INK).count() > 64);
        let sphere = IfsSystem::uniform(
            Space::Sphere2,
            vec![MapDescriptor::sphere_rotation([0.0, 0.6, 0.8], 2.4).unwrap()],
        )
        .unwrap();
        let p = SpacePoint::sphere([1.0, 0.0, 0.0]).unwrap();
        let img = render_attractor(&sphere, &p, 2, 500, 0, 64, 64).unwrap();
        assert!(img.pixels.iter().any(|p| *p != [0, 0, 0]));
    }
}
