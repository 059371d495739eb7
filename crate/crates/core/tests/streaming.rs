use std::fs;

use semstream::harness::{cmd_stream, collect_frames, Input};
use semstream::netem::LinkTrace;
use semstream::session::{metrics_from_log, EventLog, SessionConfig};
use semstream::synth::{Content, SyntheticVideo};
use semstream::video::{encode_y4m_444, VideoFormat};

#[test]
fn zero_loss_loses_no_rows() {
    let video = SyntheticVideo::new(Content::MovingSquare, 160, 96, 30.0, 90, 2).unwrap();
    let cfg = SessionConfig::new(LinkTrace::constant(2.0e6, 1000).unwrap(), 0.0, 1);
    let dir = tempfile::tempdir().unwrap();
    let (report, out) = cmd_stream(&video, &cfg, dir.path()).unwrap();
    assert!(out.metrics.iter().all(|m| m.rows_lost == 0));
    assert_eq!(report.summary.loss_dropped, 0);
    assert_eq!(report.summary.rendered_fps, 30.0);
}

#[test]
fn metrics_file_rebuilds_from_event_file() {
    let video = SyntheticVideo::new(Content::NoiseField, 128, 96, 30.0, 120, 5).unwrap();
    let trace = LinkTrace::square_wave(&[(250_000.0, 1500), (700_000.0, 1500)]).unwrap();
    let cfg = SessionConfig::new(trace, 0.15, 21);
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = cmd_stream(&video, &cfg, dir.path()).unwrap();
    let log = EventLog::read_csv(fs::File::open(&report.events_csv).unwrap()).unwrap();
    let rebuilt = semstream::session::metrics_csv_string(&metrics_from_log(&log).unwrap()).unwrap();
    assert_eq!(rebuilt, fs::read_to_string(&report.metrics_csv).unwrap());
    let header = rebuilt.lines().next().unwrap();
    assert_eq!(
        header,
        "gop_id,time_ms,mode,scale,drop_rate,sent_bps,estimated_bps,rows_lost,nacks,psnr_db,\
         boundary_flicker,frame_delay_ms,rendered_fps"
    );
}

#[test]
fn file_input_streams_like_the_generated_clip() {
    let video = SyntheticVideo::new(Content::MovingSquare, 96, 64, 30.0, 45, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.y4m");
    fs::write(&path, encode_y4m_444(&collect_frames(&video).unwrap(), (30, 1)).unwrap()).unwrap();
    let src = Input::File { path: path.clone(), format: VideoFormat::Y4m, width: 0, height: 0, fps: None }
        .open()
        .unwrap();
    assert_eq!((src.dims(), src.len(), src.fps()), ((96, 64), 45, 30.0));
    let cfg = SessionConfig::new(LinkTrace::constant(1.0e6, 1000).unwrap(), 0.1, 8);
    let (a, _) = cmd_stream(src.as_ref(), &cfg, &dir.path().join("file")).unwrap();
    assert_eq!(a.summary.gops, 5);

    let wrong = Input::File { path, format: VideoFormat::Y4m, width: 100, height: 64, fps: None };
    assert!(wrong.open().is_err());
    let missing = Input::File {
        path: dir.path().join("nope.y4m"),
        format: VideoFormat::Y4m,
        width: 0,
        height: 0,
        fps: None,
    };
    let err = missing.open().err().unwrap();
    assert!(err.to_string().contains("nope.y4m"));
}

#[test]
fn trace_file_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.trace");
    fs::write(&bad, "10\nfive\n").unwrap();
    let err = LinkTrace::load(&bad).unwrap_err();
    assert!(err.to_string().contains("bad.trace"), "{err}");
}
