#![no_main]

use libfuzzer_sys::fuzz_target;
use tundra_image::{ChainOutput, ImageOp, ImageOpChain, ImageRecord, PixelMode};

// Layout: width byte, height byte, mode byte, newline-separated op specs,
// a zero byte, then pixel bytes (cycled to fill the image).
fuzz_target!(|data: &[u8]| {
    if data.len() < 3 {
        return;
    }
    let (w, h) = (data[0] as usize % 16 + 1, data[1] as usize % 16 + 1);
    let mode = if data[2] & 1 == 0 { PixelMode::Gray8 } else { PixelMode::Rgb8 };
    let rest = &data[3..];
    let split = rest.iter().position(|&b| b == 0).unwrap_or(rest.len());
    let Ok(text) = std::str::from_utf8(&rest[..split]) else { return };
    let specs: Vec<&str> = text.lines().collect();
    for s in &specs {
        if let Ok(ImageOp::Resize { width, height, .. }) = ImageOp::parse(s) {
            if width.saturating_mul(height) > 1 << 16 {
                return;
            }
        }
    }
    let Ok(chain) = ImageOpChain::parse(&specs) else { return };
    let pixels = rest.get(split + 1..).unwrap_or(&[]);
    let img = ImageRecord::from_fn("f", w, h, mode, |x, y, c| {
        if pixels.is_empty() {
            (x * 31 + y * 7 + c) as u8
        } else {
            pixels[((y * w + x) * mode.channels() + c) % pixels.len()]
        }
    })
    .unwrap();
    let bits = |o: ChainOutput| match o {
        ChainOutput::Image(i) => (i.width(), i.height(), i.data().to_vec(), Vec::new()),
        ChainOutput::Vector(v) => (0, 0, Vec::new(), v.iter().map(|f| f.to_bits()).collect()),
    };
    match (chain.apply(&img), chain.apply_sequential(&img)) {
        (Ok(a), Ok(b)) => assert_eq!(bits(a), bits(b)),
        (Err(_), Err(_)) => {}
        (a, b) => panic!("fused {:?} vs sequential {:?}", a.is_ok(), b.is_ok()),
    }
});
