//! PNG renditions of maps and stimuli.

use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use salbench_core::preprocess::{hist_equalize, minmax_normalize};
use salbench_core::{io, SaliencyMap};

pub fn png_gray(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .expect("in-memory PNG encoding of a well-sized buffer");
    out
}

/// The display form of a saliency map: min-max scaled, then histogram
/// equalized to 8-bit gray.
pub fn display_png(map: &SaliencyMap) -> Vec<u8> {
    let eq = hist_equalize(&minmax_normalize(map));
    let pixels = io::quantize_u8(&eq).expect("equalized values lie in [0, 1]");
    png_gray(map.width(), map.height(), &pixels)
}

/// PNG stimuli pass through unchanged; gray PGM stimuli are re-encoded.
/// Without a stimulus file a flat gray image of the benchmark size stands in.
pub fn stimulus_png(path: Option<&Path>, width: usize, height: usize) -> salbench_core::Result<Vec<u8>> {
    match path {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) => {
            Ok(std::fs::read(p)?)
        }
        Some(p) => {
            let map = io::load_pgm(p)?;
            Ok(png_gray(map.width(), map.height(), &io::quantize_u8(&map)?))
        }
        None => Ok(png_gray(width, height, &vec![128; width * height])),
    }
}
