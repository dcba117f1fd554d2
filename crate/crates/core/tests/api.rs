mod common;

use serde_json::{json, Value};

use common::{harness, ts, Harness};
use dengue_surveillance::api::{handle, ApiRequest, ApiResponse};
use dengue_surveillance::fixtures::{
    self, EPID, ICN, MOH_JAFFNA, MOH_NALLUR, PHI_GURUNAGAR, PHI_NALLUR, PUBLIC, RE_JAFFNA,
};

fn call(h: &Harness, req: ApiRequest) -> ApiResponse {
    handle(&h.svc, &req)
}

fn registered() -> Harness {
    let h = harness(fixtures::context(), fixtures::registered_at());
    let res = call(
        &h,
        ApiRequest::post("/v1/cases", fixtures::sample_intake()).as_officer(ICN),
    );
    assert_eq!(res.status, 201, "{}", res.body);
    h
}

fn code(res: &ApiResponse) -> String {
    res.json()["error"]["code"]
        .as_str()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn health_and_public_live_update() {
    let h = registered();
    let res = call(&h, ApiRequest::get("/health"));
    assert_eq!(res.status, 200);
    assert_eq!(res.json()["status"], "ok");

    let at = "2013-12-31T17:07:08Z";
    let a = call(&h, ApiRequest::get(&format!("/v1/live-update?at={at}")));
    let b = call(&h, ApiRequest::get(&format!("/v1/live-update?at={at}")));
    assert_eq!(a.status, 200);
    assert_eq!(a.body, b.body, "identical state gives identical bytes");
    let body = a.json();
    assert_eq!(body["v"], 1);
    assert_eq!(body["generated_at"], at);
    let jaffna = body["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["district"] == "Jaffna")
        .unwrap()
        .clone();
    assert_eq!(
        jaffna,
        json!({"district": "Jaffna", "cases_today": 1, "last_case_at": "2013-12-31T17:01:33Z",
               "risk_places_10d": 0, "last_risk_at": null})
    );
}

#[test]
fn public_callers_see_only_the_live_update() {
    let h = registered();
    for path in [
        "/v1/cases/C000001",
        "/v1/cases",
        "/v1/worklist",
        "/v1/metrics",
        "/v1/risk-places",
    ] {
        assert_eq!(call(&h, ApiRequest::get(path)).status, 401, "{path}");
        assert_eq!(
            call(&h, ApiRequest::get(path).as_officer(PUBLIC)).status,
            401,
            "{path}"
        );
    }
    let res = call(&h, ApiRequest::post("/v1/cases", fixtures::sample_intake()));
    assert_eq!(res.status, 401);
    assert_eq!(
        call(&h, ApiRequest::get("/v1/cases").as_officer("000000000V")).status,
        401
    );
}

#[test]
fn registration_is_for_the_infection_control_nurse() {
    let h = registered();
    let body = call(&h, ApiRequest::get("/v1/cases/C000001").as_officer(ICN)).json();
    assert_eq!(body["case"]["first_name"], "Sorjaniya");
    assert_eq!(body["case"]["attention"], "Assigned");
    assert_eq!(body["work_order"]["assigned_to"], PHI_GURUNAGAR);
    for forger in [PHI_GURUNAGAR, MOH_JAFFNA, RE_JAFFNA, EPID] {
        let res = call(
            &h,
            ApiRequest::post("/v1/cases", fixtures::sample_intake()).as_officer(forger),
        );
        assert_eq!(res.status, 403, "{forger}");
    }
    assert_eq!(h.svc.with_state(|s| s.cases.len()), 1);
}

#[test]
fn validation_errors_name_the_field() {
    let h = registered();
    let mut form = fixtures::sample_intake();
    form.mobile = Some("77-654".into());
    let res = call(&h, ApiRequest::post("/v1/cases", form).as_officer(ICN));
    assert_eq!(res.status, 400);
    assert_eq!(res.json()["error"]["field"], "mobile");
    let res = call(
        &h,
        ApiRequest {
            body: Some("{not json".into()),
            ..ApiRequest::post("/v1/cases", ())
        }
        .as_officer(ICN),
    );
    assert_eq!(res.status, 400);
}

#[test]
fn suggest_completes_division_names() {
    let h = registered();
    let res = call(
        &h,
        ApiRequest::get("/v1/suggest?target=gn_divisions&prefix=Chund").as_officer(ICN),
    );
    assert_eq!(res.json()["suggestions"], json!(["Chundikul North"]));
    let res = call(
        &h,
        ApiRequest::get("/v1/suggest?target=nope&prefix=a").as_officer(ICN),
    );
    assert_eq!(res.status, 400);
}

#[test]
fn phi_worklist_and_attendance() {
    let h = registered();
    let res = call(
        &h,
        ApiRequest::get("/v1/worklist").as_officer(PHI_GURUNAGAR),
    );
    assert_eq!(res.status, 200);
    let body = res.json();
    assert_eq!(body["areas"][0]["open_cases"], 0);
    assert_eq!(body["areas"][1]["open_cases"], 1);
    assert_eq!(body["rows"][0]["case_attention"], "Attend");
    let order = body["rows"][0]["order_id"].as_str().unwrap().to_string();

    assert_eq!(
        call(&h, ApiRequest::get("/v1/worklist").as_officer(MOH_JAFFNA)).status,
        403
    );
    let attend = |who: &str| {
        call(
            &h,
            ApiRequest::post(
                &format!("/v1/work-orders/{order}/attend"),
                json!({"outcome": "confirmed"}),
            )
            .as_officer(who),
        )
    };
    assert_eq!(attend(PHI_NALLUR).status, 403, "another PHI");
    assert_eq!(attend(MOH_JAFFNA).status, 403, "not a PHI");
    let res = attend(PHI_GURUNAGAR);
    assert_eq!(res.status, 200, "{}", res.body);
    assert_eq!(res.json()["case"]["attention"], "Confirmed");
    assert_eq!(res.json()["id_register"]["moh_area"]["moh_area"], "Jaffna");
    let again = attend(PHI_GURUNAGAR);
    assert_eq!(again.status, 409);
    assert_eq!(code(&again), "illegal_transition");
}

#[test]
fn assignment_is_for_the_covering_moh() {
    let ctx = fixtures::context_with(dengue_surveillance::config::Settings {
        auto_assign: false,
        ..Default::default()
    });
    let h = harness(ctx, fixtures::registered_at());
    call(
        &h,
        ApiRequest::post("/v1/cases", fixtures::sample_intake()).as_officer(ICN),
    );
    let assign = |who: &str, to: &str| {
        call(
            &h,
            ApiRequest::post("/v1/cases/C000001/assign", json!({"assignee": to})).as_officer(who),
        )
    };
    assert_eq!(assign(RE_JAFFNA, PHI_GURUNAGAR).status, 403);
    assert_eq!(
        assign(MOH_NALLUR, PHI_GURUNAGAR).status,
        403,
        "other MOH area"
    );
    assert_eq!(
        assign(MOH_JAFFNA, PHI_NALLUR).status,
        403,
        "PHI not covering the residence"
    );
    let res = assign(MOH_JAFFNA, PHI_GURUNAGAR);
    assert_eq!(res.status, 201, "{}", res.body);
    assert_eq!(res.json()["work_order"]["assigned_by"], MOH_JAFFNA);
    assert_eq!(assign(MOH_JAFFNA, PHI_GURUNAGAR).status, 409);
    assert_eq!(assign(MOH_JAFFNA, "not-an-officer").status, 400);
    assert_eq!(
        call(
            &h,
            ApiRequest::post(
                "/v1/cases/C000404/assign",
                json!({"assignee": PHI_GURUNAGAR})
            )
            .as_officer(MOH_JAFFNA)
        )
        .status,
        404
    );
}

#[test]
fn travel_history_by_the_assigned_phi_only() {
    let h = registered();
    let path = "/v1/cases/C000001/travel-history";
    let body = json!({ "entries": fixtures::sample_travel() });
    assert_eq!(
        call(&h, ApiRequest::post(path, &body).as_officer(PHI_NALLUR)).status,
        403
    );
    assert_eq!(
        call(&h, ApiRequest::post(path, &body).as_officer(ICN)).status,
        403
    );
    h.clock.set(fixtures::live_update_at());
    let res = call(&h, ApiRequest::post(path, &body).as_officer(PHI_GURUNAGAR));
    assert_eq!(res.status, 201, "{}", res.body);
    assert_eq!(res.json()["risk_places"].as_array().unwrap().len(), 5);

    let at = "2013-12-31T17:15:44Z";
    let res = call(
        &h,
        ApiRequest::get(&format!(
            "/v1/risk-places?district=Jaffna&window=10&at={at}"
        ))
        .as_officer(EPID),
    );
    assert_eq!(res.json()["risk_places"].as_array().unwrap().len(), 5);
    let res = call(
        &h,
        ApiRequest::get(&format!("/v1/risk-places?district=Galle&at={at}")).as_officer(EPID),
    );
    assert_eq!(res.json()["risk_places"].as_array().unwrap().len(), 0);
    assert_eq!(
        call(
            &h,
            ApiRequest::get("/v1/risk-places?window=0").as_officer(EPID)
        )
        .status,
        400
    );

    let bad = json!({ "entries": [{"day_index": 15, "door_no": "1", "street": "x", "gn_division": "Nallur North", "contact_tp": "776544652"}] });
    assert_eq!(
        call(&h, ApiRequest::post(path, &bad).as_officer(PHI_GURUNAGAR)).status,
        400
    );
}

#[test]
fn read_only_roles_cannot_write() {
    let h = registered();
    for who in [RE_JAFFNA, EPID] {
        assert_eq!(
            call(&h, ApiRequest::get("/v1/cases/C000001").as_officer(who)).status,
            200
        );
        assert_eq!(
            call(&h, ApiRequest::get("/v1/metrics").as_officer(who)).status,
            200
        );
        let gen = ApiRequest::post(
            "/v1/weekly-returns/generate",
            json!({"week": "2014-W01", "district": "Jaffna", "moh_area": "Jaffna"}),
        );
        assert_eq!(call(&h, gen.as_officer(who)).status, 403);
        let res = call(
            &h,
            ApiRequest::post(
                "/v1/work-orders/W000001/attend",
                json!({"outcome": "confirmed"}),
            )
            .as_officer(who),
        );
        assert_eq!(res.status, 403);
    }
}

#[test]
fn case_reads_are_scoped() {
    let h = registered();
    assert_eq!(
        call(
            &h,
            ApiRequest::get("/v1/cases/C000001").as_officer(PHI_NALLUR)
        )
        .status,
        403
    );
    assert_eq!(
        call(
            &h,
            ApiRequest::get("/v1/cases/C000001").as_officer(MOH_NALLUR)
        )
        .status,
        403
    );
    let res = call(
        &h,
        ApiRequest::get("/v1/cases?district=Jaffna").as_officer(MOH_NALLUR),
    );
    assert_eq!(res.json()["cases"], json!([]));
    let res = call(
        &h,
        ApiRequest::get("/v1/cases?district=Jaffna&day=2013-12-31&status=assigned")
            .as_officer(MOH_JAFFNA),
    );
    assert_eq!(res.json()["cases"].as_array().unwrap().len(), 1);
    assert_eq!(
        call(
            &h,
            ApiRequest::get("/v1/cases?status=bogus").as_officer(MOH_JAFFNA)
        )
        .status,
        400
    );
    assert_eq!(
        call(&h, ApiRequest::get("/v1/cases/C000404").as_officer(EPID)).status,
        404
    );
}

#[test]
fn weekly_returns_by_moh() {
    let h = registered();
    h.clock.set(ts("2014-01-06T09:00:00+05:30"));
    let get = |who: &str, moh: &str| {
        call(
            &h,
            ApiRequest::get(&format!(
                "/v1/weekly-return?district=Jaffna&moh_area={moh}&week=2014-W01"
            ))
            .as_officer(who),
        )
    };
    let res = get(MOH_JAFFNA, "Jaffna");
    assert_eq!(res.status, 200, "{}", res.body);
    let r: Value = res.json()["weekly_return"].clone();
    assert_eq!(
        (r["suspected_count"].clone(), r["confirmed_count"].clone()),
        (json!(1), json!(0))
    );
    assert_eq!(get(MOH_NALLUR, "Jaffna").status, 403);
    assert_eq!(get(RE_JAFFNA, "Nallur").status, 200);
    assert_eq!(get(PHI_GURUNAGAR, "Jaffna").status, 403);
    assert_eq!(get(MOH_JAFFNA, "Atlantis").status, 404);

    let res = call(
        &h,
        ApiRequest::post("/v1/weekly-returns/generate", json!({"week": "2014-W01"}))
            .as_officer(MOH_JAFFNA),
    );
    assert_eq!(res.status, 201, "{}", res.body);
    assert_eq!(
        res.json()["weekly_return"]["moh_area"]["moh_area"],
        "Jaffna"
    );
    let future = call(
        &h,
        ApiRequest::post("/v1/weekly-returns/generate", json!({"week": "2014-W09"}))
            .as_officer(MOH_JAFFNA),
    );
    assert_eq!(future.status, 400);
    let metrics = call(&h, ApiRequest::get("/v1/metrics").as_officer(EPID)).json();
    assert_eq!(metrics["epi_week"], "2014-W02");
    assert_eq!(metrics["baseline_cycle_days"], 12);
}

#[test]
fn unknown_routes_are_404() {
    let h = registered();
    assert_eq!(call(&h, ApiRequest::get("/nope")).status, 404);
    assert_eq!(
        call(&h, ApiRequest::get("/v1/nope").as_officer(EPID)).status,
        404
    );
}

#[test]
fn http_adapter_round_trip() {
    use std::io::{Read, Write};
    use std::sync::Arc;

    let h = registered();
    let svc = Arc::new(h.svc);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, dengue_surveillance::http::router(svc)).await });

    let send = |raw: String| {
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        s.write_all(raw.as_bytes()).unwrap();
        let mut out = String::new();
        s.read_to_string(&mut out).unwrap();
        out
    };
    let out = send("GET /v1/live-update?at=2013-12-31T17%3A07%3A08Z HTTP/1.1\r\nHost: t\r\nConnection: close\r\n\r\n".into());
    assert!(out.starts_with("HTTP/1.1 200"), "{out}");
    assert!(
        out.contains("\"generated_at\":\"2013-12-31T17:07:08Z\""),
        "{out}"
    );

    let out = send(format!(
        "GET /v1/suggest?target=gn_divisions&prefix=Nallur%20N HTTP/1.1\r\nHost: t\r\nX-Officer-Id: {ICN}\r\nConnection: close\r\n\r\n"
    ));
    assert!(out.contains("[\"Nallur North\"]"), "{out}");

    let body = serde_json::to_string(&fixtures::sample_intake()).unwrap();
    let out = send(format!(
        "POST /v1/cases HTTP/1.1\r\nHost: t\r\nX-Officer-Id: {PHI_GURUNAGAR}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    ));
    assert!(out.starts_with("HTTP/1.1 403"), "{out}");
}
