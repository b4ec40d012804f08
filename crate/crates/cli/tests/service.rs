use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use uisal::features::{RgbImage, UiElement};
use uisal::model::{Autoencoder, FeatureNormalizer, ProviderRegistry, SaliencyModel};
use uisal::toolkit::{synth_screen, Checkpoint, SynthConfig};
use uisal::SeededRng;
use uisal_cli::service::{router, AppState};

fn state() -> Arc<AppState> {
    let mut rng = SeededRng::new(11);
    let encoders = std::array::from_fn(|_| Autoencoder::init(&mut rng));
    let mut model = SaliencyModel::new(encoders, [16, 8], vec![], 5);
    model.normalizer = Some(FeatureNormalizer {
        mean: vec![0.3; 17],
        std: vec![0.2; 17],
    });
    let bytes = Checkpoint::from_model(&model, 5, None).unwrap().to_bytes().unwrap();
    Arc::new(AppState::from_checkpoint_bytes(&bytes, ProviderRegistry::new()).unwrap())
}

fn png_b64(img: &RgbImage) -> String {
    base64::engine::general_purpose::STANDARD.encode(img.encode_png().unwrap())
}

fn screen_request(index: usize) -> Value {
    let cfg = SynthConfig {
        max_elements: 8,
        ..SynthConfig::default()
    };
    let s = synth_screen(&cfg, index).unwrap().screen;
    json!({ "image_png_base64": png_b64(&s.image), "elements": s.elements })
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn post(state: &Arc<AppState>, uri: &str, body: &Value) -> (StatusCode, Value) {
    let (s, b) = call(state, "POST", uri, Some(serde_json::to_vec(body).unwrap())).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn health_reports_model_version() {
    let st = state();
    let (s, b) = call(&st, "GET", "/api/health", None).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["model_version"].as_str().unwrap(), st.model_version);
}

#[tokio::test]
async fn predict_sums_to_one_and_keeps_ids() {
    let st = state();
    let req = screen_request(0);
    let (s, v) = post(&st, "/api/predict", &req).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let sal = v["saliency"].as_array().unwrap();
    assert_eq!(sal.len(), req["elements"].as_array().unwrap().len());
    let total: f64 = sal.iter().map(|e| e["value"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-6);
    for (e, r) in sal.iter().zip(req["elements"].as_array().unwrap()) {
        assert_eq!(e["id"], r["id"]);
    }
}

#[tokio::test]
async fn single_element_gets_all_the_mass() {
    let st = state();
    let img = RgbImage::filled(40, 30, [0.2, 0.4, 0.6]);
    let body = json!({ "image_png_base64": png_b64(&img), "elements": [{ "id": 7, "bbox": [2, 3, 20, 25] }] });
    let (s, v) = post(&st, "/api/predict", &body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["saliency"], json!([{ "id": 7, "value": 1.0 }]));
}

#[tokio::test]
async fn compare_identical_variants_has_zero_deltas() {
    let st = state();
    let req = screen_request(1);
    let (s, v) = post(&st, "/api/compare", &json!({ "variants": [req.clone(), req] })).await;
    assert_eq!(s, StatusCode::OK);
    let variants = v["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    assert_eq!(variants[0]["saliency"], variants[1]["saliency"]);
    for var in variants {
        for d in var["deltas"].as_array().unwrap() {
            assert_eq!(d["delta"].as_f64().unwrap(), 0.0);
        }
    }
}

#[tokio::test]
async fn compare_reports_missing_elements_and_real_changes() {
    let st = state();
    let base = screen_request(2);
    let mut edited = base.clone();
    let els = edited["elements"].as_array_mut().unwrap();
    els.pop();
    els.push(json!({ "id": 999, "bbox": [0, 0, 10, 10] }));
    let (s, v) = post(&st, "/api/compare", &json!({ "variants": [base, edited] })).await;
    assert_eq!(s, StatusCode::OK);
    let second = &v["variants"][1];
    let deltas = second["deltas"].as_array().unwrap();
    assert!(deltas.last().unwrap()["delta"].is_null());
    let sal0 = v["variants"][0]["saliency"].as_array().unwrap();
    for (d, e) in deltas
        .iter()
        .zip(second["saliency"].as_array().unwrap())
        .take(deltas.len() - 1)
    {
        let before = sal0.iter().find(|b| b["id"] == e["id"]).unwrap()["value"]
            .as_f64()
            .unwrap();
        assert_eq!(d["delta"].as_f64().unwrap(), e["value"].as_f64().unwrap() - before);
    }
}

#[tokio::test]
async fn error_statuses() {
    let st = state();
    let (s, _) = call(&st, "POST", "/api/predict", Some(b"{not json".to_vec())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let mut req = screen_request(0);
    req["elements"][0]["bbox"] = json!([0, 0, 5000, 10]);
    assert_eq!(post(&st, "/api/predict", &req).await.0, StatusCode::BAD_REQUEST);

    let mut req = screen_request(0);
    req["elements"][0]["bbox"] = json!([10, 10, 5, 20]);
    assert_eq!(post(&st, "/api/predict", &req).await.0, StatusCode::BAD_REQUEST);

    let mut req = screen_request(0);
    req["elements"] = json!([]);
    assert_eq!(post(&st, "/api/predict", &req).await.0, StatusCode::BAD_REQUEST);

    let mut req = screen_request(0);
    req["image_png_base64"] = json!("%%% not base64");
    assert_eq!(
        post(&st, "/api/predict", &req).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );

    let mut req = screen_request(0);
    req["image_png_base64"] = json!(base64::engine::general_purpose::STANDARD.encode(b"GIF89a"));
    let (s, v) = post(&st, "/api/predict", &req).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("PNG"));

    assert_eq!(
        post(&st, "/api/compare", &json!({ "variants": [] })).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_return_identical_bodies() {
    let st = state();
    let body = serde_json::to_vec(&screen_request(3)).unwrap();
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let st = st.clone();
            let body = body.clone();
            tokio::spawn(async move { call(&st, "POST", "/api/predict", Some(body)).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        let (s, b) = t.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn element_json_shape() {
    let e: UiElement = serde_json::from_value(json!({ "id": 3, "bbox": [1, 2, 3, 4] })).unwrap();
    assert_eq!(e.id, 3);
    assert_eq!(<[u32; 4]>::from(e.bbox), [1, 2, 3, 4]);
}
