use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use perio::phantom::{render, PhantomScene, PhantomToothSpec};
use perio::pipeline::service::{router, PhantomResponse, ReportResponse, ServiceState};
use perio::raster::io;
use perio::{Mask, Stage, StageReport};
use serde_json::Value;
use tower::ServiceExt;

fn scene() -> PhantomScene {
    PhantomScene::new(
        200,
        170,
        vec![
            PhantomToothSpec::upright(60.0, 55.0, 32.0, 90.0).with_bone(6.0, 9.0),
            PhantomToothSpec::upright(140.0, 58.0, 34.0, 88.0).with_bone(20.0, 16.0),
        ],
    )
}

fn form(fields: &[(&str, Vec<u8>)]) -> Request<Body> {
    let boundary = "XyZ";
    let mut body = Vec::new();
    for (name, data) in fields {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n").as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    Request::post("/api/analyze")
        .header("content-type", format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

fn masks() -> Vec<(&'static str, Vec<u8>)> {
    let r = render(&scene()).unwrap();
    let enc = |m: &Mask| io::encode_mask(m).unwrap();
    vec![("tooth", enc(&r.tooth)), ("bone", enc(&r.bone)), ("cej", enc(&r.cej))]
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn app() -> Router {
    router(ServiceState::new(None))
}

#[tokio::test]
async fn health_reports_ok() {
    let (s, body) = send(&app(), Request::get("/api/health").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn analyze_then_fetch() {
    let app = app();
    let (s, body) = send(&app, form(&masks())).await;
    assert_eq!(s, StatusCode::OK);
    let r: ReportResponse = serde_json::from_slice(&body).unwrap();
    let stages: Vec<_> = r.report.teeth.iter().map(|t| t.stage_rule).collect();
    assert_eq!(stages, vec![Some(Stage::I), Some(Stage::II)]);

    let (s, body) = send(&app, Request::get(format!("/api/report/{}", r.id)).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    let fetched: StageReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(fetched, r.report);
}

#[tokio::test]
async fn thresholds_as_form_fields() {
    let mut fields = masks();
    fields.push(("t1", b"5".to_vec()));
    fields.push(("t2", b"12".to_vec()));
    let (s, body) = send(&app(), form(&fields)).await;
    assert_eq!(s, StatusCode::OK);
    let r: ReportResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.report.thresholds.t1, 5.0);
    assert_eq!(r.report.teeth[1].stage_rule, Some(Stage::III));
}

#[tokio::test]
async fn restage_keeps_measurements() {
    let app = app();
    let (_, body) = send(&app, form(&masks())).await;
    let r: ReportResponse = serde_json::from_slice(&body).unwrap();
    let req = Request::post(format!("/api/restage/{}", r.id))
        .header("content-type", "application/json")
        .body(Body::from(r#"{"t1": 50.0, "t2": 60.0}"#))
        .unwrap();
    let (s, body) = send(&app, req).await;
    assert_eq!(s, StatusCode::OK);
    let re: ReportResponse = serde_json::from_slice(&body).unwrap();
    assert!(re.report.teeth.iter().all(|t| t.stage_rule == Some(Stage::I)));
    for (a, b) in re.report.teeth.iter().zip(&r.report.teeth) {
        assert_eq!(a.rbl_percent(), b.rbl_percent());
    }
    let (_, body) = send(&app, Request::get(format!("/api/report/{}", r.id)).body(Body::empty()).unwrap()).await;
    let stored: StageReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(stored.thresholds.t1, 50.0);
}

#[tokio::test]
async fn restage_rejects_inverted_thresholds() {
    let app = app();
    let (_, body) = send(&app, form(&masks())).await;
    let r: ReportResponse = serde_json::from_slice(&body).unwrap();
    let req = Request::post(format!("/api/restage/{}", r.id))
        .header("content-type", "application/json")
        .body(Body::from(r#"{"t1": 40.0, "t2": 20.0}"#))
        .unwrap();
    let (s, _) = send(&app, req).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    for uri in ["/api/report/nope", "/api/overlay/nope.png"] {
        let (s, body) = send(&app, Request::get(uri).body(Body::empty()).unwrap()).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        let v: Value = serde_json::from_slice(&body).unwrap();
        assert!(v["error"].is_string());
    }
    let req = Request::post("/api/restage/nope")
        .header("content-type", "application/json")
        .body(Body::from(r#"{"t1": 15.0, "t2": 33.0}"#))
        .unwrap();
    assert_eq!(send(&app, req).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_inputs_are_400() {
    let app = app();
    let mut fields = masks();
    fields[0].1 = b"not a png".to_vec();
    assert_eq!(send(&app, form(&fields)).await.0, StatusCode::BAD_REQUEST);

    let fields = masks()[..2].to_vec();
    let (s, body) = send(&app, form(&fields)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(String::from_utf8_lossy(&body).contains("cej"));

    let mut fields = masks();
    fields.push(("t1", b"abc".to_vec()));
    assert_eq!(send(&app, form(&fields)).await.0, StatusCode::BAD_REQUEST);

    let req = Request::post("/api/phantom")
        .header("content-type", "application/json")
        .body(Body::from("{\"width\": "))
        .unwrap();
    assert_eq!(send(&app, req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn mismatched_mask_sizes_are_400() {
    let mut fields = masks();
    fields[1].1 = io::encode_mask(&Mask::new(10, 10)).unwrap();
    assert_eq!(send(&app(), form(&fields)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversized_body_is_413() {
    let app = router(ServiceState::new(None).with_body_limit(1024));
    let (s, _) = send(&app, form(&masks())).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn phantom_endpoint_returns_masks_and_truth() {
    let app = app();
    let req = Request::post("/api/phantom")
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(&scene()).unwrap()))
        .unwrap();
    let (s, body) = send(&app, req).await;
    assert_eq!(s, StatusCode::OK);
    let p: PhantomResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(p.truth.len(), 2);
    let tooth = io::decode_mask(&base64::engine::general_purpose::STANDARD.decode(&p.masks.tooth).unwrap()).unwrap();
    assert_eq!((tooth.width(), tooth.height()), (200, 170));
    for (t, truth) in p.report.teeth.iter().zip(&p.truth) {
        assert_eq!(t.stage_rule, Some(truth.stage));
        assert!((t.rbl_percent().unwrap() - truth.rbl_percent).abs() < 2.0);
    }
    let (s, png) = send(&app, Request::get(format!("/api/overlay/{}.png", p.id)).body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(io::decode_overlay(&png).is_ok());
}
