// Image sources of a shoebox room up to second order.

use brirkit::ism::enumerate_images;
use brirkit::room::{paper_scene, DirectivityMode};

/// Image count per reflection order and the shortest path of each order.
pub fn run_example() -> Vec<(u32, usize, f64)> {
    let scene = paper_scene(DirectivityMode::Omni, None);
    let images = enumerate_images(&scene.room, scene.sources[0].position, scene.receiver.position, 2);
    (0..=2)
        .map(|order| {
            let of: Vec<_> = images.iter().filter(|i| i.order == order).collect();
            let shortest = of.iter().map(|i| i.path_length).fold(f64::INFINITY, f64::min);
            (order, of.len(), shortest)
        })
        .collect()
}

#[allow(dead_code)]
fn main() {
    for (order, n, d) in run_example() {
        println!("order {order}: {n:>3} images, nearest {d:.3} m");
    }
}
