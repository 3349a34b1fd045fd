//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

// the tabulated oracle values keep every digit of the reference computation
#![allow(clippy::excessive_precision)]

use std::path::PathBuf;
use std::time::Instant;

use latentconn::analysis::{roc_auc, t_cdf, ttest_ind};
use latentconn::cli::{
    cmd_analyze, cmd_synth, cmd_train, AnalyzeConfig, SynthConfig, TrainCmdConfig,
};
use latentconn::connectome::{assemble_input, Diagnosis, EdgeVector, SubjectRecord};
use latentconn::generator::{fcs_delta, feature_delta, generate_matrix, manifold_grid};
use latentconn::nnet::{adadelta_update_slice, Adadelta};
use latentconn::rng::Rng64;
use latentconn::synth::SyntheticSpec;
use latentconn::vae::{
    kl_divergence, load_checkpoint, split_dataset, vae_grad_check, CohortStats, TrainConfig,
    VaeModel,
};

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("latentconn_accept_{name}"));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn subjects_by_group(n_asd: usize, n_nc: usize) -> Vec<SubjectRecord> {
    (0..n_asd + n_nc)
        .map(|k| SubjectRecord {
            id: format!("s{k:04}"),
            group: if k < n_asd { Diagnosis::Asd } else { Diagnosis::Nc },
            age: 16.0,
            fiq: None,
            edges: EdgeVector::new(vec![0.5; 3]).unwrap(),
        })
        .collect()
}

#[test]
fn criterion_1_dimensional_fidelity() {
    // 90-region atlas: 4005 edges, 4006 model inputs
    let edges = EdgeVector::new(vec![0.5; 90 * 89 / 2]).unwrap();
    assert_eq!(edges.len(), 4005);
    let input = assemble_input(&edges, 16.5).unwrap();
    assert_eq!(input.len(), 4006);

    // 972-subject manifest (465 ASD / 507 NC) at fraction 0.1 -> 874/98
    let subjects = subjects_by_group(465, 507);
    let (train_set, val_set) = split_dataset(&subjects, 0.1, 42).unwrap();
    assert_eq!(train_set.len(), 874);
    assert_eq!(val_set.len(), 98);

    eprintln!("acceptance criterion 1: PASS - edge 4005, input 4006, split 874/98");
}

#[test]
fn criterion_2_gradient_correctness_100_seeds() {
    // downsized objective: 10 edges, 4 hidden units, 2 latent features
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let config = TrainConfig {
            hidden_dims: vec![4],
            latent_dim: 2,
            seed,
            ..TrainConfig::default()
        };
        let model = VaeModel::new(10, &config).unwrap();
        let mut rng = Rng64::new(10_000 + seed);
        let mut input: Vec<f64> = (0..10).map(|_| rng.next_range(0.05, 0.95)).collect();
        input.push(rng.next_range(0.06, 0.58));
        let eps = [rng.next_normal(), rng.next_normal()];
        let err = vae_grad_check(&model, &input, &eps, 1e-5).unwrap();
        assert!(err < 1e-5, "seed {seed}: max relative error {err}");
        worst = worst.max(err);
    }
    eprintln!(
        "acceptance criterion 2: PASS - 100 seeds, worst relative error {worst:.2e} < 1e-5"
    );
}

#[test]
fn criterion_3_kl_oracle_monte_carlo() {
    // exact zero at the prior
    assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);

    let mut rng = Rng64::new(33);
    let draws = 1_000_000usize;
    let mut worst: f64 = 0.0;
    for pair in 0..20 {
        let mean: Vec<f64> = (0..2)
            .map(|_| {
                let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
                sign * rng.next_range(0.8, 2.0)
            })
            .collect();
        let log_var: Vec<f64> = (0..2).map(|_| rng.next_range(-1.0, 1.0)).collect();
        let closed = kl_divergence(&mean, &log_var);

        // Monte-Carlo estimate of E[ln q(z) - ln p(z)] over reparameterized draws
        let sigma: Vec<f64> = log_var.iter().map(|lv| (0.5 * lv).exp()).collect();
        let mut acc = 0.0;
        for _ in 0..draws {
            for d in 0..2 {
                let e = rng.next_normal();
                let z = mean[d] + sigma[d] * e;
                acc += -0.5 * log_var[d] - 0.5 * e * e + 0.5 * z * z;
            }
        }
        let estimate = acc / draws as f64;
        let rel = (estimate - closed).abs() / closed;
        assert!(
            rel < 0.01,
            "pair {pair}: closed {closed} vs MC {estimate} (rel {rel})"
        );
        worst = worst.max(rel);
    }
    eprintln!(
        "acceptance criterion 3: PASS - 20 pairs x 1e6 draws, worst relative error {:.3}%",
        worst * 100.0
    );
}

#[test]
fn criterion_4_adadelta_single_step_oracle() {
    let opt = Adadelta { rho: 0.95, eps: 1e-6, learning_rate: 1.0 };
    let mut params = [0.0];
    let mut sq_g = [0.0];
    let mut sq_u = [0.0];
    adadelta_update_slice(&opt, &mut params, &[1.0], &mut sq_g, &mut sq_u);
    let delta = params[0];

    // hand evaluation of the update rule: E[g^2] = (1-rho) g^2, then
    // dx = -sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps) * g with E[dx^2] still zero
    let hand = -((0.0f64 + 1e-6).sqrt() / (0.05f64 + 1e-6).sqrt());
    assert!(
        (delta - hand).abs() < 1e-12,
        "step {delta} vs hand-evaluated {hand}"
    );
    // the nominal -0.0044721353 is the same quantity to about 5e-7
    // (it drops the epsilon stabilizer in the denominator)
    assert!((delta - (-0.0044721353)).abs() < 5e-7);
    eprintln!(
        "acceptance criterion 4: PASS - single step {delta:.12} matches hand evaluation to 1e-12"
    );
}

// Reference CDF values tabulated once with 30-digit arithmetic (mpmath),
// df in 1..=1000, |t| <= 50.
const T_CDF_TABLE: &[(f64, f64, f64)] = &[
    (-50.0, 1.0, 0.0063653491009727967),
    (-17.32050807568877, 1.0, 0.018357251000866455),
    (-5.0, 1.0, 0.062832958189001184),
    (-2.5, 1.0, 0.12111894159084340),
    (-1.959963984540054, 1.0, 0.15017381375072811),
    (-1.0, 1.0, 0.25000000000000000),
    (-0.5, 1.0, 0.35241638234956673),
    (0.0, 1.0, 0.50000000000000000),
    (0.5, 1.0, 0.64758361765043327),
    (1.0, 1.0, 0.75000000000000000),
    (1.959963984540054, 1.0, 0.84982618624927189),
    (2.5, 1.0, 0.87888105840915660),
    (5.0, 1.0, 0.93716704181099882),
    (17.32050807568877, 1.0, 0.98164274899913355),
    (50.0, 1.0, 0.99363465089902720),
    (-50.0, 2.0, 0.00019988007994404029),
    (-17.32050807568877, 2.0, 0.0016583793611784306),
    (-5.0, 2.0, 0.018874775675311863),
    (-2.5, 2.0, 0.064805860110755405),
    (-1.959963984540054, 2.0, 0.094531205734230726),
    (-1.0, 2.0, 0.21132486540518712),
    (-0.5, 2.0, 0.33333333333333333),
    (0.0, 2.0, 0.50000000000000000),
    (0.5, 2.0, 0.66666666666666667),
    (1.0, 2.0, 0.78867513459481288),
    (1.959963984540054, 2.0, 0.90546879426576927),
    (2.5, 2.0, 0.93519413988924460),
    (5.0, 2.0, 0.98112522432468814),
    (17.32050807568877, 2.0, 0.99834162063882157),
    (50.0, 2.0, 0.99980011992005596),
    (-50.0, 3.0, 8.8085760206359871e-6),
    (-17.32050807568877, 3.0, 0.00020968711532677042),
    (-5.0, 3.0, 0.0076962190366511505),
    (-2.5, 3.0, 0.043853323504032774),
    (-1.959963984540054, 3.0, 0.072428649615227201),
    (-1.0, 3.0, 0.19550110947788532),
    (-0.5, 3.0, 0.32572398242407550),
    (0.0, 3.0, 0.50000000000000000),
    (0.5, 3.0, 0.67427601757592450),
    (1.0, 3.0, 0.80449889052211468),
    (1.959963984540054, 3.0, 0.92757135038477280),
    (2.5, 3.0, 0.95614667649596723),
    (5.0, 3.0, 0.99230378096334885),
    (17.32050807568877, 3.0, 0.99979031288467323),
    (50.0, 3.0, 0.99999119142397936),
    (-50.0, 5.0, 3.0238788133006126e-8),
    (-17.32050807568877, 5.0, 5.8760300441161988e-6),
    (-5.0, 5.0, 0.0020523579900266612),
    (-2.5, 5.0, 0.027245049671188121),
    (-1.959963984540054, 5.0, 0.053646448834333486),
    (-1.0, 5.0, 0.18160873382456131),
    (-0.5, 5.0, 0.31914943582046450),
    (0.0, 5.0, 0.50000000000000000),
    (0.5, 5.0, 0.68085056417953550),
    (1.0, 5.0, 0.81839126617543869),
    (1.959963984540054, 5.0, 0.94635355116566651),
    (2.5, 5.0, 0.97275495032881188),
    (5.0, 5.0, 0.99794764200997334),
    (17.32050807568877, 5.0, 0.99999412396995588),
    (50.0, 5.0, 0.99999996976121187),
    (-50.0, 6.0, 2.1464505717275724e-9),
    (-17.32050807568877, 6.0, 1.1866672719481251e-6),
    (-5.0, 6.0, 0.0012261708803792755),
    (-2.5, 6.0, 0.023264116142083656),
    (-1.959963984540054, 6.0, 0.048850015215809433),
    (-1.0, 6.0, 0.17795884187479109),
    (-0.5, 6.0, 0.31744000000000000),
    (0.0, 6.0, 0.50000000000000000),
    (0.5, 6.0, 0.68256000000000000),
    (1.0, 6.0, 0.82204115812520891),
    (1.959963984540054, 6.0, 0.95114998478419057),
    (2.5, 6.0, 0.97673588385791634),
    (5.0, 6.0, 0.99877382911962072),
    (17.32050807568877, 6.0, 0.99999881333272805),
    (50.0, 6.0, 0.99999999785354943),
    (-50.0, 10.0, 1.2371551646513400e-13),
    (-17.32050807568877, 10.0, 4.3569526349729658e-9),
    (-5.0, 10.0, 0.00026866680137822631),
    (-2.5, 10.0, 0.015723422118304402),
    (-1.959963984540054, 10.0, 0.039220464606994972),
    (-1.0, 10.0, 0.17044656615102994),
    (-0.5, 10.0, 0.31394680287148647),
    (0.0, 10.0, 0.50000000000000000),
    (0.5, 10.0, 0.68605319712851353),
    (1.0, 10.0, 0.82955343384897006),
    (1.959963984540054, 10.0, 0.96077953539300503),
    (2.5, 10.0, 0.98427657788169560),
    (5.0, 10.0, 0.99973133319862177),
    (17.32050807568877, 10.0, 0.99999999564304737),
    (50.0, 10.0, 0.99999999999987628),
    (-50.0, 30.0, 9.3577088296113563e-31),
    (-17.32050807568877, 30.0, 1.8079632798685837e-17),
    (-5.0, 30.0, 1.1648342733503898e-5),
    (-2.5, 30.0, 0.0090578245340333471),
    (-1.959963984540054, 30.0, 0.029673357778809637),
    (-1.0, 30.0, 0.16265430771301495),
    (-0.5, 30.0, 0.31036150244256364),
    (0.0, 30.0, 0.50000000000000000),
    (0.5, 30.0, 0.68963849755743636),
    (1.0, 30.0, 0.83734569228698505),
    (1.959963984540054, 30.0, 0.97032664222119036),
    (2.5, 30.0, 0.99094217546596665),
    (5.0, 30.0, 0.99998835165726650),
    (17.32050807568877, 30.0, 0.99999999999999998),
    (50.0, 30.0, 1.0000000000000000),
    (-50.0, 100.0, 7.2360818398806944e-73),
    (-17.32050807568877, 100.0, 3.6131504271338346e-32),
    (-5.0, 100.0, 1.2250867067519002e-6),
    (-2.5, 100.0, 0.0070228945620385887),
    (-1.959963984540054, 100.0, 0.026391586548999227),
    (-1.0, 100.0, 0.15986207789206168),
    (-0.5, 100.0, 0.30908678291544329),
    (0.0, 100.0, 0.50000000000000000),
    (0.5, 100.0, 0.69091321708455671),
    (1.0, 100.0, 0.84013792210793832),
    (1.959963984540054, 100.0, 0.97360841345100077),
    (2.5, 100.0, 0.99297710543796141),
    (5.0, 100.0, 0.99999877491329325),
    (17.32050807568877, 100.0, 1.0000000000000000),
    (50.0, 100.0, 1.0000000000000000),
    (-50.0, 467.0, 6.3442405884807099e-190),
    (-17.32050807568877, 467.0, 1.4262660849310400e-52),
    (-5.0, 467.0, 4.0627864486457818e-7),
    (-2.5, 467.0, 0.0063806254348027442),
    (-1.959963984540054, 467.0, 0.025297131584489648),
    (-1.0, 467.0, 0.15891418449212484),
    (-0.5, 467.0, 0.30865529451610928),
    (0.0, 467.0, 0.50000000000000000),
    (0.5, 467.0, 0.69134470548389072),
    (1.0, 467.0, 0.84108581550787516),
    (1.959963984540054, 467.0, 0.97470286841551035),
    (2.5, 467.0, 0.99361937456519726),
    (5.0, 467.0, 0.99999959372135514),
    (17.32050807568877, 467.0, 1.0000000000000000),
    (50.0, 467.0, 1.0000000000000000),
    (-50.0, 970.0, 5.0457956456784106e-271),
    (-17.32050807568877, 970.0, 4.5583438202318002e-59),
    (-5.0, 970.0, 3.4007404845853080e-7),
    (-2.5, 970.0, 0.0062917524855596298),
    (-1.959963984540054, 970.0, 0.025142991904725726),
    (-1.0, 970.0, 0.15877994895734235),
    (-0.5, 970.0, 0.30859424122839519),
    (0.0, 970.0, 0.50000000000000000),
    (0.5, 970.0, 0.69140575877160481),
    (1.0, 970.0, 0.84122005104265765),
    (1.959963984540054, 970.0, 0.97485700809527427),
    (2.5, 970.0, 0.99370824751444037),
    (5.0, 970.0, 0.99999965992595154),
    (17.32050807568877, 970.0, 1.0000000000000000),
    (50.0, 970.0, 1.0000000000000000),
    (-50.0, 1000.0, 1.3793362061625825e-274),
    (-17.32050807568877, 1000.0, 2.7932089463845906e-59),
    (-5.0, 1000.0, 3.3836281823243152e-7),
    (-2.5, 1000.0, 0.0062892839005453984),
    (-1.959963984540054, 1000.0, 0.025138700516348768),
    (-1.0, 1000.0, 0.15877620904233615),
    (-0.5, 1000.0, 0.30859254041693741),
    (0.0, 1000.0, 0.50000000000000000),
    (0.5, 1000.0, 0.69140745958306259),
    (1.0, 1000.0, 0.84122379095766385),
    (1.959963984540054, 1000.0, 0.97486129948365123),
    (2.5, 1000.0, 0.99371071609945460),
    (5.0, 1000.0, 0.99999966163718177),
    (17.32050807568877, 1000.0, 1.0000000000000000),
    (50.0, 1000.0, 1.0000000000000000),
];

/// Brute-force AUC oracle: count winning pairs, ties worth one half.
fn auc_by_pair_counting(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_5_statistics_oracles() {
    // t CDF against the tabulated reference: 1e-9 absolute everywhere, and
    // 1e-9 relative in the far tails where the absolute bound is weak
    let mut cases = 0;
    for &(t, df, expected) in T_CDF_TABLE {
        let got = t_cdf(t, df);
        assert!(
            (got - expected).abs() < 1e-9,
            "t={t} df={df}: {got} vs {expected}"
        );
        if expected > 0.0 && expected < 1e-9 {
            assert!(
                ((got - expected) / expected).abs() < 1e-9,
                "tail t={t} df={df}: {got} vs {expected}"
            );
        }
        cases += 1;
    }

    // worked t-test example: t = 10 sqrt(3), df 6, p from the same oracle
    let tt = ttest_ind(&[2.1, 2.0, 1.9, 2.0], &[1.0, 1.1, 0.9, 1.0]).unwrap();
    assert!((tt.t - 10.0 * 3.0f64.sqrt()).abs() < 1e-10);
    assert_eq!(tt.df, 6.0);
    assert!((tt.p - 2.3733345438962487e-6).abs() < 1e-9);
    cases += 1;

    // worked Pearson example: r = 0.5, n = 3 gives p = 2/3 exactly
    let pp = latentconn::analysis::pearson_with_p(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    assert!((pp.r - 0.5).abs() < 1e-12);
    assert!((pp.p - 2.0 / 3.0).abs() < 1e-9);
    cases += 1;

    // AUC against brute-force pair counting on the worked example plus
    // twenty random score sets (with ties)
    let worked = roc_auc(&[1.0, 3.0, 2.0, 4.0], &[true, true, false, false]).unwrap();
    assert!((worked - 0.25).abs() < 1e-12);
    cases += 1;
    let mut rng = Rng64::new(55);
    for _ in 0..20 {
        let n = 8 + rng.next_below(20) as usize;
        let scores: Vec<f64> = (0..n).map(|_| (rng.next_below(12) as f64) / 4.0).collect();
        let mut positive: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
        positive[0] = true;
        positive[1] = false;
        let fast = roc_auc(&scores, &positive).unwrap();
        let slow = auc_by_pair_counting(&scores, &positive);
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        cases += 1;
    }
    eprintln!("acceptance criterion 5: PASS - {cases} oracle cases within 1e-9");
}

#[test]
fn criterion_6_synthetic_recovery_chain() {
    let started = Instant::now();
    let dir = scratch_dir("chain");
    let synth_out = dir.join("synth");
    let spec = SyntheticSpec::default();
    cmd_synth(&SynthConfig { out: synth_out.clone(), spec: spec.clone() }).unwrap();

    let train_out = dir.join("train");
    cmd_train(&TrainCmdConfig {
        manifest: synth_out.join("manifest.csv"),
        edges: synth_out.join("edges"),
        out: train_out.clone(),
        train: TrainConfig::default(),
    })
    .unwrap();

    let analyze_out = dir.join("analyze");
    let report = cmd_analyze(&AnalyzeConfig {
        checkpoint: train_out.join("checkpoint.json"),
        manifest: synth_out.join("manifest.csv"),
        edges: synth_out.join("edges"),
        out: analyze_out,
        welch: false,
    })
    .unwrap();

    // a significant group-related feature, p < 0.01
    let idx = report.selected_feature.expect("a feature must be selected");
    let p = report.features[idx].p;
    assert!(p < 0.01, "selected feature p = {p}");

    // discriminative power
    let auc = report.auc.as_ref().expect("AUC present");
    assert!(auc.auc > 0.8, "AUC = {}", auc.auc);

    // planted negative IQ coupling recovered with sign agreement: after
    // orienting the feature so ASD is the high side, the correlation with
    // IQ is negative
    let iq = report.iq_correlation.as_ref().expect("IQ correlation present");
    let oriented_r = if auc.asd_higher { iq.r } else { -iq.r };
    assert!(oriented_r < 0.0, "oriented IQ correlation = {oriented_r}");

    // validation loss improved over the 50 epochs
    let history = std::fs::read_to_string(train_out.join("loss_history.csv")).unwrap();
    let val_losses: Vec<f64> = history
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(val_losses.len(), 50);
    assert!(
        val_losses[49] < val_losses[0],
        "validation loss did not improve: {} -> {}",
        val_losses[0],
        val_losses[49]
    );

    // the decoded delta concentrates on the planted edge set
    let truth = latentconn::synth::generate(&spec).unwrap();
    let model = load_checkpoint(&train_out.join("checkpoint.json")).unwrap();
    let delta = feature_delta(&model, idx, 1.0, None).unwrap();
    let k = truth.planted_edges.len();
    let ranked = delta.edges_by_magnitude();
    let top: std::collections::BTreeSet<usize> = ranked[..k].iter().copied().collect();
    let planted: std::collections::BTreeSet<usize> =
        truth.planted_edges.iter().copied().collect();
    let overlap = top.intersection(&planted).count() as f64 / k as f64;
    assert!(overlap > 0.8, "top-{k} overlap = {overlap}");

    // strength annotation covers every planted core region
    let atlas = latentconn::connectome::RegionAtlas::aal90();
    let core = spec.planted_region_indices(&atlas).unwrap();
    let orientation = if auc.asd_higher { 1.0 } else { -1.0 };
    let strengths = fcs_delta(&model, idx, orientation, None, 1.5).unwrap();
    let annotated: std::collections::BTreeSet<usize> =
        strengths.annotated.iter().copied().collect();
    for region in &core {
        assert!(
            annotated.contains(region),
            "planted region {} ({}) missing from annotation",
            region,
            atlas.names()[*region]
        );
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "chain took {elapsed:?}, budget is 5 minutes"
    );
    eprintln!(
        "acceptance criterion 6: PASS - p {p:.2e}, AUC {:.3}, oriented IQ r {oriented_r:.3}, overlap {overlap:.3}, {elapsed:?}",
        auc.auc
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn criterion_7_generative_structural_checks() {
    let config = TrainConfig { seed: 9, ..TrainConfig::default() };
    let mut model = VaeModel::new(4005, &config).unwrap();
    model.cohort = Some(CohortStats {
        latent_mean: vec![0.3, -0.6],
        latent_sd: vec![0.9, 1.2],
        mean_age_years: 16.5,
        n_subjects: 100,
    });

    // zero-shift delta is exactly the zero matrix
    let zero = feature_delta(&model, 0, 0.0, None).unwrap();
    assert!(zero.values().iter().all(|&v| v == 0.0));

    // manifold center cell is exactly zero
    let grid = manifold_grid(&model, (-2.0, 2.0), 5, None).unwrap();
    let center = &grid.cells[2 * 5 + 2];
    assert!(center.values().iter().all(|&v| v == 0.0));

    // every generated matrix is symmetric, in (0,1) off-diagonal, zero diagonal
    let mut rng = Rng64::new(77);
    for _ in 0..5 {
        let z = [rng.next_range(-2.0, 2.0), rng.next_range(-2.0, 2.0)];
        let m = generate_matrix(&model, &z, rng.next_range(8.0, 40.0)).unwrap();
        let n = m.n_regions();
        assert_eq!(n, 90);
        for i in 0..n {
            assert_eq!(m.get(i, i), 0.0);
            for j in (i + 1)..n {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!(m.get(i, j) > 0.0 && m.get(i, j) < 1.0);
            }
        }
    }

    // node strength deltas double-count edge deltas
    let fd = feature_delta(&model, 1, 1.0, None).unwrap();
    let nd = fcs_delta(&model, 1, 1.0, None, 1.5).unwrap();
    let node_sum: f64 = nd.deltas.iter().sum();
    let edge_sum = fd.edge_sum();
    assert!(
        (node_sum - 2.0 * edge_sum).abs() < 1e-12,
        "node sum {node_sum} vs 2x edge sum {}",
        2.0 * edge_sum
    );
    eprintln!("acceptance criterion 7: PASS - zero deltas exact, matrices valid, node/edge identity to 1e-12");
}

fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut files = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let key = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn criterion_8_byte_identical_reruns() {
    let dir = scratch_dir("determinism");
    // a smaller cohort keeps this fast; epochs stay at the full 50 so the
    // complete loss history is exercised
    let spec = SyntheticSpec { subjects: 40, seed: 21, ..SyntheticSpec::default() };
    let train_config = TrainConfig { seed: 3, ..TrainConfig::default() };

    let mut trees: Vec<std::collections::BTreeMap<String, Vec<u8>>> = Vec::new();
    for run in 0..2 {
        let root = dir.join(format!("run{run}"));
        let synth_out = root.join("synth");
        cmd_synth(&SynthConfig { out: synth_out.clone(), spec: spec.clone() }).unwrap();
        let train_out = root.join("train");
        cmd_train(&TrainCmdConfig {
            manifest: synth_out.join("manifest.csv"),
            edges: synth_out.join("edges"),
            out: train_out.clone(),
            train: train_config.clone(),
        })
        .unwrap();
        cmd_analyze(&AnalyzeConfig {
            checkpoint: train_out.join("checkpoint.json"),
            manifest: synth_out.join("manifest.csv"),
            edges: synth_out.join("edges"),
            out: root.join("analyze"),
            welch: false,
        })
        .unwrap();
        latentconn::cli::cmd_generate(&latentconn::cli::GenerateConfig {
            checkpoint: train_out.join("checkpoint.json"),
            out: root.join("generate"),
            feature: 0,
            direction: 1.0,
            age: None,
            threshold: 1.5,
        })
        .unwrap();
        latentconn::cli::cmd_manifold(&latentconn::cli::ManifoldConfig {
            checkpoint: train_out.join("checkpoint.json"),
            out: root.join("manifold"),
            steps: 5,
            range: (-2.0, 2.0),
            age: None,
        })
        .unwrap();
        trees.push(read_tree(&root));
    }

    let (a, b) = (&trees[0], &trees[1]);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        b.keys().collect::<Vec<_>>(),
        "file sets differ"
    );
    let history = a
        .keys()
        .find(|k| k.ends_with("loss_history.csv"))
        .expect("loss history present");
    assert_eq!(
        std::str::from_utf8(&a[history]).unwrap().lines().count(),
        51,
        "history must cover all 50 epochs"
    );
    let mut compared = 0;
    for (key, bytes) in a {
        assert_eq!(bytes, &b[key], "file {key} differs between runs");
        compared += 1;
    }
    eprintln!(
        "acceptance criterion 8: PASS - {compared} files byte-identical across reruns (50-epoch history included)"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn criterion_9_optional_real_data_check() {
    // advisory: runs only when ABIDE-derived inputs are supplied
    let manifest = std::env::var("LATENTCONN_ABIDE_MANIFEST").ok();
    let edges = std::env::var("LATENTCONN_ABIDE_EDGES").ok();
    let (manifest, edges) = match (manifest, edges) {
        (Some(m), Some(e)) => (PathBuf::from(m), PathBuf::from(e)),
        _ => {
            eprintln!(
                "acceptance criterion 9: SKIP - set LATENTCONN_ABIDE_MANIFEST and LATENTCONN_ABIDE_EDGES to run the real-data check"
            );
            return;
        }
    };
    let dir = scratch_dir("real_data");
    let train_out = dir.join("train");
    cmd_train(&TrainCmdConfig {
        manifest: manifest.clone(),
        edges: edges.clone(),
        out: train_out.clone(),
        train: TrainConfig::default(),
    })
    .unwrap();
    let report = cmd_analyze(&AnalyzeConfig {
        checkpoint: train_out.join("checkpoint.json"),
        manifest,
        edges,
        out: dir.join("analyze"),
        welch: false,
    })
    .unwrap();
    let auc = report.auc.as_ref().map(|a| a.auc).unwrap_or(f64::NAN);
    let within = (auc - 0.60).abs() <= 0.10;
    eprintln!(
        "acceptance criterion 9: PASS - pipeline completed on supplied data; AUC {auc:.3} ({} the advisory 0.60 +- 0.10 band)",
        if within { "within" } else { "outside" }
    );
    std::fs::remove_dir_all(&dir).ok();
}
