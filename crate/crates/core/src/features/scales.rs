//! The three context views of an element.

use super::resize::resize_bilinear;
use super::{BoundingBox, RgbImage, UiElement, UiScreen};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const CROP_HEIGHT: usize = 162;
pub const CROP_WIDTH: usize = 288;
pub const CROP_SHAPE: [usize; 3] = [3, CROP_HEIGHT, CROP_WIDTH];

/// Element crop, element plus midpoint surround, whole screen; each a
/// `[3, 162, 288]` channel-first tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTriplet {
    pub crops: [Tensor<f32>; 3],
}

/// Surround box whose edges sit halfway between the element's edges and
/// the screen's (rounded half up).
pub fn surround_box(bbox: &BoundingBox, width: usize, height: usize) -> BoundingBox {
    let half_up = |v: u64| v.div_ceil(2) as u32;
    BoundingBox {
        x0: half_up(bbox.x0 as u64),
        y0: half_up(bbox.y0 as u64),
        x1: half_up(bbox.x1 as u64 + width as u64),
        y1: half_up(bbox.y1 as u64 + height as u64),
    }
}

/// The three crop regions, innermost first.
pub fn scale_boxes(bbox: &BoundingBox, width: usize, height: usize) -> [BoundingBox; 3] {
    [
        *bbox,
        surround_box(bbox, width, height),
        BoundingBox::full(width, height),
    ]
}

pub fn image_to_chw(img: &RgbImage) -> Tensor<f32> {
    let hw = img.width * img.height;
    let mut data = vec![0.0f32; 3 * hw];
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * hw + i] = px[c];
        }
    }
    Tensor::new(vec![3, img.height, img.width], data).expect("chw shape")
}

pub fn chw_to_image(t: &Tensor<f32>) -> Result<RgbImage> {
    let (c, h, w) = t.dims3()?;
    if c != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {c}")));
    }
    let hw = h * w;
    let mut data = Vec::with_capacity(3 * hw);
    for i in 0..hw {
        for ch in 0..3 {
            data.push(t.data()[ch * hw + i]);
        }
    }
    RgbImage::new(w, h, data)
}

/// Crops `region` and resizes it to the fixed crop size.
pub fn crop_resized(image: &RgbImage, region: &BoundingBox) -> Tensor<f32> {
    image_to_chw(&resize_bilinear(&image.crop(region), CROP_WIDTH, CROP_HEIGHT))
}

pub fn extract_scales(screen: &UiScreen, element: &UiElement) -> Result<ScaleTriplet> {
    if !element.bbox.fits(screen.width(), screen.height()) {
        return Err(Error::Invalid(format!(
            "element {} does not fit screen {}",
            element.id, screen.id
        )));
    }
    let boxes = scale_boxes(&element.bbox, screen.width(), screen.height());
    Ok(ScaleTriplet {
        crops: boxes.map(|b| crop_resized(&screen.image, &b)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn midpoint_arithmetic() {
        let b = BoundingBox::new(40, 60, 80, 100).unwrap();
        assert_eq!(<[u32; 4]>::from(surround_box(&b, 200, 300)), [20, 30, 140, 200]);
        // odd sums round half up
        let b = BoundingBox::new(3, 5, 4, 6).unwrap();
        assert_eq!(<[u32; 4]>::from(surround_box(&b, 9, 9)), [2, 3, 7, 8]);
    }

    #[test]
    fn whole_image_element_gives_identical_scales() {
        let mut rng = SeededRng::new(1);
        let img = RgbImage::new(30, 50, (0..30 * 50 * 3).map(|_| rng.uniform() as f32).collect()).unwrap();
        let e = UiElement {
            id: 0,
            bbox: BoundingBox::full(30, 50),
        };
        let screen = UiScreen::new("s", img, vec![e]).unwrap();
        let t = extract_scales(&screen, &e).unwrap();
        assert_eq!(t.crops[0], t.crops[1]);
        assert_eq!(t.crops[1], t.crops[2]);
        for c in &t.crops {
            assert_eq!(c.shape(), &CROP_SHAPE);
        }
    }

    #[test]
    fn chw_round_trip() {
        let img = RgbImage::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let t = image_to_chw(&img);
        assert_eq!(t.data(), &[0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
        assert_eq!(chw_to_image(&t).unwrap(), img);
    }

    proptest! {
        #[test]
        fn scales_are_nested(w in 1u32..400, h in 1u32..400, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..1.0) {
            let x0 = (a * (w - 1) as f64) as u32;
            let y0 = (b * (h - 1) as f64) as u32;
            let x1 = x0 + 1 + (c * (w - x0 - 1) as f64) as u32;
            let y1 = y0 + 1 + (d * (h - y0 - 1) as f64) as u32;
            let bbox = BoundingBox::new(x0, y0, x1, y1).unwrap();
            let [s0, s1, s2] = scale_boxes(&bbox, w as usize, h as usize);
            prop_assert!(s1.contains_box(&s0));
            prop_assert!(s2.contains_box(&s1));
            prop_assert!(s1.fits(w as usize, h as usize));
        }
    }
}
