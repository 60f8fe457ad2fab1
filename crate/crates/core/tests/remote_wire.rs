//! Remote adapters against an in-process HTTP backend.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Multipart, State};
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use memovis_core::adapters::mock::hash_embedding;
use memovis_core::adapters::{
    wire, AdapterError, BoxIntent, BoxPrompt, Capability, EndpointConfig, EndpointTable,
    GenerationParams, PixelBox, ScoredRegion,
};
use memovis_core::{DepthMap, MaskImage, RgbImage};

#[derive(Clone, Debug, Default)]
struct Received {
    route: String,
    parts: BTreeMap<String, Vec<u8>>,
}

type Log = Arc<Mutex<Vec<Received>>>;

async fn read_parts(mut mp: Multipart) -> BTreeMap<String, Vec<u8>> {
    let mut parts = BTreeMap::new();
    while let Some(field) = mp.next_field().await.unwrap() {
        let name = field.name().unwrap().to_string();
        parts.insert(name, field.bytes().await.unwrap().to_vec());
    }
    parts
}

fn spawn_backend() -> (String, Log) {
    let log: Log = Arc::default();
    let record = |route: &'static str| {
        move |State(log): State<Log>, mp: Multipart| async move {
            let parts = read_parts(mp).await;
            log.lock().unwrap().push(Received { route: route.into(), parts: parts.clone() });
            parts
        }
    };
    let embed = {
        let record = record("embed");
        move |state: State<Log>, mp: Multipart| async move {
            let parts = record(state, mp).await;
            let key = parts.get("params").or(parts.get("image")).cloned().unwrap_or_default();
            wire::encode_embedding_response(&hash_embedding(&key, 8))
        }
    };
    let generate = {
        let record = record("generate");
        move |state: State<Log>, mp: Multipart| async move {
            let parts = record(state, mp).await;
            let dims = if let Some(d) = parts.get("depth") {
                DepthMap::from_png(d).unwrap().dims()
            } else {
                RgbImage::from_png(&parts["image"]).unwrap().dims()
            };
            RgbImage::filled(dims.0, dims.1, [9, 99, 199]).to_png().unwrap()
        }
    };
    let segment = {
        let record = record("segment");
        move |state: State<Log>, mp: Multipart| async move {
            let parts = record(state, mp).await;
            let img = RgbImage::from_png(&parts["image"]).unwrap();
            let prompt = wire::decode_box_prompt(&parts["params"]).unwrap();
            let regions = vec![ScoredRegion { score: 0.8, mask: prompt.rect.to_mask(img.width(), img.height()) }];
            wire::encode_segmentation_response(&regions).unwrap()
        }
    };
    let app = Router::new()
        .route("/embed", post(embed))
        .route("/generate", post(generate))
        .route("/segment", post(segment))
        .route("/wrong-dim", post(|| async { wire::encode_embedding_response(&[1.0, 0.0]) }))
        .route("/fail", post(|| async { (StatusCode::SERVICE_UNAVAILABLE, "overloaded") }))
        .route("/not-png", post(|| async { "hello" }))
        .with_state(log.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{}", rx.recv().unwrap()), log)
}

fn table(base: &str, routes: &[(Capability, &str)]) -> EndpointTable {
    let mut t = EndpointTable::default();
    for (cap, route) in routes {
        let mut cfg = EndpointConfig::remote(format!("{base}/{route}"));
        cfg.timeout_secs = 10.0;
        cfg.dim = Some(8);
        t.endpoints.insert(*cap, cfg);
    }
    t
}

#[test]
fn generation_payload_carries_defaults_and_conditions() {
    let (base, log) = spawn_backend();
    let suite = table(&base, &[(Capability::DepthScribbleGeneration, "generate")]).build().unwrap();
    let depth = DepthMap::empty(16, 12);
    let scribble = MaskImage::from_fn(16, 12, |r, c| r == c);
    let out = suite
        .generate_depth_scribble(&depth, &scribble, &GenerationParams::new("a desk lamp").with_seed(5))
        .unwrap();
    assert_eq!(out.dims(), (16, 12));
    let got = log.lock().unwrap().pop().unwrap();
    assert_eq!(got.route, "generate");
    assert_eq!(got.parts.keys().collect::<Vec<_>>(), ["depth", "params", "scribble"]);
    let json: serde_json::Value = serde_json::from_slice(&got.parts["params"]).unwrap();
    assert_eq!(json["steps"], 30);
    assert_eq!(json["positive_suffix"], "realistic, high quality, high resolution, 8k, detailed");
    assert_eq!(json["negative_prompt"], "monochrome, worst quality, low quality, blur");
    assert_eq!(json["condition_strengths"]["scribble"], 0.7);
    assert_eq!(json["condition_strengths"]["depth"], 0.3);
    assert_eq!(json["seed"], 5);
    assert_eq!(MaskImage::from_png(&got.parts["scribble"]).unwrap(), scribble);
}

#[test]
fn missing_seed_is_injected_before_sending() {
    let (base, log) = spawn_backend();
    let suite = table(&base, &[(Capability::DepthGeneration, "generate")]).build().unwrap();
    suite.generate_depth(&DepthMap::empty(4, 4), &GenerationParams::new("x")).unwrap();
    let got = log.lock().unwrap().pop().unwrap();
    let json: serde_json::Value = serde_json::from_slice(&got.parts["params"]).unwrap();
    assert!(json["seed"].is_u64());
}

#[test]
fn embeddings_segmentation_and_inpainting_round_trip() {
    let (base, log) = spawn_backend();
    let suite = table(
        &base,
        &[
            (Capability::TextEmbedding, "embed"),
            (Capability::ImageEmbedding, "embed"),
            (Capability::BoxSegmentation, "segment"),
            (Capability::Inpainting, "generate"),
        ],
    )
    .build()
    .unwrap();
    let t = suite.encode_text("a chair").unwrap();
    assert_eq!(t.len(), 8);
    assert!((t.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() - 1.0).abs() < 1e-5);
    let query: serde_json::Value = serde_json::from_slice(&log.lock().unwrap()[0].parts["params"]).unwrap();
    assert_eq!(query, serde_json::json!({"text": "a chair"}));

    let img = RgbImage::filled(20, 10, [5, 5, 5]);
    assert_eq!(suite.encode_image(&img).unwrap().len(), 8);
    let prompt = BoxPrompt { rect: PixelBox { left: 2, top: 1, right: 6, bottom: 4 }, intent: BoxIntent::Remove };
    let mask = suite.segment_box(&img, &prompt).unwrap();
    assert_eq!(mask.count(), 12);

    let out = suite.inpaint(&img, &mask, &GenerationParams::new("background").with_seed(1)).unwrap();
    for r in 0..10 {
        for c in 0..20 {
            let want = if mask.get(r, c) { [9, 99, 199] } else { [5, 5, 5] };
            assert_eq!(out.get(r, c), want);
        }
    }
}

#[test]
fn backend_faults_map_to_typed_errors() {
    let (base, _) = spawn_backend();
    let dims = table(&base, &[(Capability::TextEmbedding, "wrong-dim")]).build().unwrap();
    assert!(matches!(
        dims.encode_text("x"),
        Err(AdapterError::DimensionMismatch { expected: 8, actual: 2, .. })
    ));
    let fail = table(&base, &[(Capability::DepthGeneration, "fail")]).build().unwrap();
    let err = fail.generate_depth(&DepthMap::empty(4, 4), &GenerationParams::new("x")).unwrap_err();
    assert!(matches!(err, AdapterError::Transport { .. }));
    assert!(err.to_string().contains("503"), "{err}");
    let junk = table(&base, &[(Capability::DepthGeneration, "not-png")]).build().unwrap();
    assert!(matches!(
        junk.generate_depth(&DepthMap::empty(4, 4), &GenerationParams::new("x")),
        Err(AdapterError::MalformedResponse { .. })
    ));
}

#[test]
fn invalid_params_never_reach_the_network() {
    let (base, log) = spawn_backend();
    let suite = table(&base, &[(Capability::DepthGeneration, "generate")]).build().unwrap();
    let mut p = GenerationParams::new("x");
    p.steps = 0;
    assert!(matches!(suite.generate_depth(&DepthMap::empty(4, 4), &p), Err(AdapterError::InvalidParams(_))));
    assert!(log.lock().unwrap().is_empty());
}
