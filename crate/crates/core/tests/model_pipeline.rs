use uisal::features::{extract_scales, low_level_features, BoundingBox, RgbImage, UiElement, UiScreen, CROP_SHAPE};
use uisal::model::{fit_model, ExperimentConfig, FeatureNormalizer, ProviderRegistry, SaliencyModel};
use uisal::toolkit::{synth_screens, Checkpoint, SynthConfig};
use uisal::SeededRng;

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default().with_seed(3);
    cfg.autoencoder.epochs = 1;
    cfg.autoencoder.batch_size = 4;
    cfg.max_crops_per_scale = Some(4);
    cfg.head.epochs = 4;
    cfg.head.dropout = 0.0;
    cfg.hidden = [16, 8];
    cfg
}

fn screens(n: usize) -> Vec<UiScreen> {
    let cfg = SynthConfig {
        screens: n,
        max_elements: 8,
        seed: 9,
        ..Default::default()
    };
    synth_screens(&cfg).unwrap().into_iter().map(|s| s.screen).collect()
}

#[test]
fn shape_contract_holds_for_random_elements() {
    let mut rng = SeededRng::new(1);
    let (w, h) = (180, 320);
    let image = RgbImage::new(w, h, (0..w * h * 3).map(|_| rng.uniform() as f32).collect()).unwrap();
    let elements: Vec<UiElement> = (0..20)
        .map(|i| {
            let x0 = rng.int_range(0, w - 2);
            let y0 = rng.int_range(0, h - 2);
            let x1 = rng.int_range(x0 + 1, w);
            let y1 = rng.int_range(y0 + 1, h);
            UiElement {
                id: i,
                bbox: BoundingBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32).unwrap(),
            }
        })
        .collect();
    let screen = UiScreen::new("r", image, elements).unwrap();
    let mut model = SaliencyModel::new(
        std::array::from_fn(|s| uisal::model::Autoencoder::init(&mut SeededRng::new(s as u64))),
        [16, 8],
        vec![],
        0,
    );
    let low: Vec<_> = screen
        .elements
        .iter()
        .map(|e| low_level_features(&screen, e).unwrap())
        .collect();
    model.normalizer = Some(FeatureNormalizer::fit(&low).unwrap());
    let registry = ProviderRegistry::new();
    for e in &screen.elements {
        let t = extract_scales(&screen, e).unwrap();
        for crop in &t.crops {
            assert_eq!(crop.shape(), &CROP_SHAPE[..]);
            assert_eq!(model.encoders[0].encode(crop).unwrap().shape(), &[16, 18, 32]);
        }
    }
    let rows = model.screen_features(&screen, &registry).unwrap();
    assert_eq!(rows.len(), 20 * 27665);
}

#[test]
fn checkpoint_round_trip_predicts_bit_identically() {
    let data = screens(4);
    let cfg = tiny_config();
    let registry = ProviderRegistry::new();
    let (model, history) = fit_model(&data, &cfg, &registry).unwrap();
    let bytes = Checkpoint::from_model(&model, 3, Some(cfg))
        .unwrap()
        .to_bytes()
        .unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap().to_model(&registry).unwrap();
    for s in &data {
        let a = model.predict_ui(s, &registry).unwrap();
        let b = back.predict_ui(s, &registry).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(history.autoencoders.len(), 3);
    assert!(history.head.epochs() >= 1);
    let env = history.head.train_envelope();
    assert!(env.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn training_is_deterministic() {
    let data = screens(3);
    let registry = ProviderRegistry::new();
    let run = || {
        let (m, h) = fit_model(&data, &tiny_config(), &registry).unwrap();
        (Checkpoint::from_model(&m, 3, None).unwrap().to_bytes().unwrap(), h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}
