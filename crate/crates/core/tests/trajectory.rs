use skewsplat::dataset::{orbit, CameraEntry};
use skewsplat::forward::RenderConfig;
use skewsplat::multiview::blob_scene;
use skewsplat::trajectory::{entries_to_views, max_frame_jump, render_rgb8};

/// Largest mean channel change between consecutive frames of a 60-pose
/// orbit. Measured at about 0.004 on the blob scene.
const MAX_JUMP: f64 = 0.2;

#[test]
fn orbit_sequence_is_smooth() {
    let scene = blob_scene::<f32>();
    let views = orbit([0.0; 3], 3.5, 1.0, 60, 48, 48, 0.9).unwrap();
    let entries: Vec<_> = views.iter().map(|v| CameraEntry::from_view(v, None)).collect();
    let views = entries_to_views::<f32>(&serde_json::from_str::<Vec<CameraEntry>>(&serde_json::to_string(&entries).unwrap()).unwrap()).unwrap();
    let frames: Vec<Vec<u8>> = views.iter().map(|v| render_rgb8(&scene, v, &RenderConfig::default()).unwrap()).collect();
    let jump = max_frame_jump(&frames);
    assert!(jump > 0.0 && jump < MAX_JUMP, "{jump}");
}
