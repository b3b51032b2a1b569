use pafbox::assemble::PipelineParams;
use pafbox::synth::synthesize;
use pafbox::{limb_score, parse_poses, Matcher, PersonPose, Point2, Real, SceneGenerator, Skeleton, SynthParams};

fn round_trip<T: Real>(seed: u64, people: usize, matcher: Matcher) {
    let skeleton = Skeleton::preset("mpii16").unwrap();
    let params = SynthParams::<T>::default();
    let truth = SceneGenerator::new(&skeleton, 256, 256).min_separation(28.0).generate::<T>(seed, people).unwrap();
    let fields = synthesize(&truth, &skeleton, &params, 256, 256).unwrap();
    let parse = parse_poses(&fields, &PipelineParams { matcher, ..Default::default() }).unwrap();
    assert_eq!(parse.poses.len(), people);
    for person in &truth {
        let hit = parse.poses.iter().any(|pose| {
            pose.points.iter().zip(&person.points).all(|(q, t)| q.is_some_and(|q| q.distance(*t).wide() <= 0.5))
        });
        assert!(hit, "seed {seed}: person lost");
    }
}

#[test]
fn f32_and_f64_round_trips() {
    for seed in 0..6 {
        round_trip::<f32>(seed, 3, Matcher::Exact);
        round_trip::<f64>(seed, 3, Matcher::Exact);
    }
}

#[test]
fn greedy_matcher_on_separated_scenes() {
    for seed in 0..4 {
        round_trip::<f64>(seed, 2, Matcher::Greedy);
    }
}

#[test]
fn true_limb_on_grid_scores_one() {
    let pair = Skeleton::new("pair", vec!["a".into(), "b".into()], vec![[0, 1]], 0, vec![0.1; 2]).unwrap();
    let pose = PersonPose::all_visible(&pair, vec![Point2::new(5.0, 12.0), Point2::new(40.0, 12.0)]).unwrap();
    let fields = synthesize(&[pose], &pair, &SynthParams::<f64>::default(), 48, 24).unwrap();
    for n in [2, 10, 1000] {
        let e = limb_score(&fields.affinities[0], Point2::new(5.0, 12.0), Point2::new(40.0, 12.0), n).unwrap();
        assert!((e - 1.0).abs() < 1e-3, "n={n}: {e}");
        let back = limb_score(&fields.affinities[0], Point2::new(40.0, 12.0), Point2::new(5.0, 12.0), n).unwrap();
        assert!((back + 1.0).abs() < 1e-3);
    }
}
