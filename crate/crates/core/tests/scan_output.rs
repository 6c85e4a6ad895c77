use std::collections::BTreeMap;

use unruh_otto::cycle::{self, EngineParams, EntangledState};
use unruh_otto::response::singular_band;
use unruh_otto::scan::{self, Axis, Output, Param, ScanSpec};
use unruh_otto::MotionKind;

fn spec() -> ScanSpec {
    ScanSpec {
        axes: vec![
            "A=0.1:13:30".parse::<Axis>().unwrap(),
            "W=0.05:2:7".parse().unwrap(),
            "b2=0.9,-0.6".parse().unwrap(),
        ],
        fixed: [(Param::AlphaH, 0.2), (Param::AlphaC, 0.1)].into(),
        motion: MotionKind::AntiParallel,
        outputs: Output::ALL.into(),
    }
}

fn parse(csv: &str) -> (Vec<String>, Vec<BTreeMap<String, String>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            header
                .iter()
                .cloned()
                .zip(l.split(',').map(String::from))
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn output_is_independent_of_worker_count() {
    let s = spec();
    let one = scan::render_csv(&s, &scan::run_scan(&s, Some(1)).unwrap());
    let four = scan::render_csv(&s, &scan::run_scan(&s, Some(4)).unwrap());
    assert_eq!(one, four);
}

#[test]
fn rows_are_lexicographic_and_complete() {
    let s = spec();
    let rows = scan::run_scan(&s, None).unwrap();
    assert_eq!(rows.len(), 30 * 7 * 2);
    for pair in rows.windows(2) {
        assert!(pair[0].coords < pair[1].coords);
    }
}

#[test]
fn csv_round_trips_to_printed_precision() {
    let s = spec();
    let csv = scan::render_csv(&s, &scan::run_scan(&s, None).unwrap());
    assert!(csv.starts_with("# tool: unruh-otto"));
    let (header, rows) = parse(&csv);
    assert_eq!(header[..3], ["A", "W", "b2"]);
    assert_eq!(header.last().unwrap(), "masked");
    let (a_pts, w_pts, b_pts) = (s.axes[0].points(), s.axes[1].points(), s.axes[2].points());
    let mut coords = Vec::new();
    for a in &a_pts {
        for w in &w_pts {
            for b in &b_pts {
                coords.push((*a, *w, *b));
            }
        }
    }
    let mut unmasked = 0;
    for (row, (a, w, b2)) in rows.iter().zip(coords) {
        assert_eq!(row["A"], scan::fmt_num(a));
        assert_eq!(row["W"], scan::fmt_num(w));
        assert_eq!(row["b2"], scan::fmt_num(b2));
        if row["masked"] == "1" {
            assert!(singular_band(a).is_some());
            assert!(row["trace_work"].is_empty());
            continue;
        }
        assert!(
            singular_band(a).is_none(),
            "unmasked row inside band at A={a}"
        );
        unmasked += 1;
        let params = EngineParams {
            motion: s.motion,
            a,
            w,
            alpha_h: 0.2,
            alpha_c: 0.1,
            state: EntangledState::from_b2(b2).unwrap(),
        };
        let again = cycle::assess(&params).unwrap();
        assert_eq!(row["trace_work"], scan::fmt_num(again.trace_work));
        assert_eq!(row["trace_heat_in"], scan::fmt_num(again.trace_heat_in));
        assert_eq!(row["trace_heat_out"], scan::fmt_num(again.trace_heat_out));
        assert_eq!(
            row["eta_E"],
            again.eta_e.map(scan::fmt_num).unwrap_or_default()
        );
        assert_eq!(row["feasible"], if again.feasible { "1" } else { "0" });
        let printed: f64 = row["trace_work"].parse().unwrap();
        assert!((printed - again.trace_work).abs() <= 5e-9 * again.trace_work.abs());
    }
    assert_eq!(rows.len(), 30 * 7 * 2);
    assert!(unmasked > 0);
}

#[test]
fn band_points_are_masked() {
    let mut s = spec();
    s.axes[0] = "A=6.25,6.3,12.55,1".parse().unwrap();
    let rows = scan::run_scan(&s, None).unwrap();
    let masked = rows.iter().filter(|r| r.result.is_err()).count();
    assert_eq!(masked, 3 * 7 * 2);
}

#[test]
fn json_rendering_carries_spec() {
    let s = spec();
    let rows = scan::run_scan(&s, None).unwrap();
    let v = scan::render_scan_json(&s, &rows);
    assert_eq!(v["rows"].as_array().unwrap().len(), rows.len());
    let back: ScanSpec = serde_json::from_value(v["spec"].clone()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn parallel_work_surface_is_negative() {
    let s = ScanSpec {
        axes: vec![
            "A=0.1:10:25".parse().unwrap(),
            "W=0.05:2:15".parse().unwrap(),
            "b2=0.9,-0.9".parse().unwrap(),
        ],
        fixed: [(Param::AlphaH, 0.5), (Param::AlphaC, 0.25)].into(),
        motion: MotionKind::Parallel,
        outputs: [Output::Traces].into(),
    };
    for row in scan::run_scan(&s, None).unwrap() {
        if let Ok(a) = row.result {
            assert!(a.trace_work < 0.0, "{:?}", row.coords);
        }
    }
}
