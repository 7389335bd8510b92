#![no_main]

use libfuzzer_sys::fuzz_target;
use tundra_image::{decode, encode, sniff_format, ImageFormat, PixelMode};

fuzz_target!(|data: &[u8]| {
    let Ok(img) = decode(data, None) else { return };
    assert!(sniff_format(data).is_some());
    let format = match img.mode() {
        PixelMode::Gray8 => ImageFormat::Pgm,
        _ => ImageFormat::Ppm,
    };
    let back = decode(&encode(&img, format).unwrap(), Some(format)).unwrap();
    assert_eq!((back.width(), back.height(), back.data()), (img.width(), img.height(), img.data()));
});
