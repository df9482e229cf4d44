// ptseg: command-line front end for scene generation, dataset runs,
// evaluation, MOTS conversion, interaction simulation and the servers.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ptseg/datasets.hpp"
#include "ptseg/error.hpp"
#include "ptseg/interaction.hpp"
#include "ptseg/metrics.hpp"
#include "ptseg/service.hpp"
#include "ptseg/synthetic.hpp"
#include "ptseg/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ptseg;

namespace {

struct NoiseOptions {
  double sigma = 0.0;
  double dilation = 0.0;
  double occlusion_flip = 0.0;
  double mask_flip = 0.0;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--sigma", sigma, "Tracker jitter (px)");
    app->add_option("--dilation", dilation, "Segmenter boundary dilation (px)");
    app->add_option("--occlusion-flip", occlusion_flip, "Occlusion flip probability");
    app->add_option("--mask-flip", mask_flip, "Mask pixel flip probability");
    app->add_option("--seed", seed, "Noise seed");
  }
  NoiseSpec spec() const { return {dilation, sigma, occlusion_flip, mask_flip}; }
};

struct ConfigOptions {
  std::string file;
  std::optional<std::string> psm;
  std::optional<int> positives;
  std::optional<int> negatives;
  std::optional<int> iterations;
  std::optional<std::string> reinit;
  std::optional<int> horizon;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--config", file, "PipelineConfig JSON file");
    app->add_option("--psm", psm, "random | kmedoids | shi_tomasi | mixed");
    app->add_option("--positives", positives, "Positive points per mask");
    app->add_option("--negatives", negatives, "Negative points per mask");
    app->add_option("--iterations", iterations, "Refinement iterations");
    app->add_option("--reinit", reinit, "off | A | B | C | D");
    app->add_option("--horizon", horizon, "Reinitialization horizon (frames)");
    app->add_option("--rng-seed", seed, "Point sampling seed");
  }

  PipelineConfig load() const {
    PipelineConfig c;
    if (!file.empty()) {
      std::ifstream in(file);
      require(in.good(), ErrorKind::not_found, "cannot open " + file);
      c = json::parse(in).get<PipelineConfig>();
    }
    if (psm) c.psm = point_selection_from_string(*psm);
    if (positives) c.positive_per_mask = *positives;
    if (negatives) c.negative_per_mask = *negatives;
    if (iterations) c.refinement_iterations = *iterations;
    if (reinit) c.reinit = reinit_variant_from_string(*reinit);
    if (horizon) c.horizon = *horizon;
    if (seed) c.rng_seed = *seed;
    c.validate();
    return c;
  }
};

SceneSpec preset(const std::string& name, const NoiseSpec& noise, std::uint64_t seed) {
  if (name.rfind("suite:", 0) == 0) return suite_scene(std::stoi(name.substr(6)), noise, seed);
  if (name == "reveal") return reveal_scene(noise, seed);
  if (name == "vanish") return vanish_scene(noise, seed);
  if (name == "three-shapes") return three_shapes_scene();
  fail(ErrorKind::invalid_input, "unknown preset '" + name + "' (suite:0..9, reveal, vanish, three-shapes)");
}

// Scene oracle when the sequence has one and no address was given.
BackendFactory backend_factory(const std::optional<std::string>& address) {
  return [address](const VosDatapoint& dp) {
    if (address) return wire::connect_backend(*address);
    require(dp.scene_path.has_value(), ErrorKind::precondition,
            "sequence '" + dp.sequence + "' has no scene file; pass --backend");
    return oracle_backends(load_scene(dp.scene_path->string()));
  };
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::invalid_input, "cannot write " + path);
  out << j.dump(2) << "\n";
}

DatasetScore score_predictions(const std::vector<VosDatapoint>& data,
                               const std::vector<SequencePrediction>& preds) {
  std::vector<SequenceScore> seqs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].video.ground_truth.empty()) continue;
    seqs.push_back(score_sequence(data[i].sequence, preds[i].masks, data[i].video.ground_truth));
  }
  return aggregate(std::move(seqs));
}

void print_score(const DatasetScore& s) {
  std::printf("J&F %.4f  J %.4f  F %.4f  (%zu sequences)\n", s.jf, s.mean_j, s.mean_f,
              s.sequences.size());
}

int write_predictions(const std::vector<VosDatapoint>& data,
                      const std::vector<SequencePrediction>& preds, const fs::path& out) {
  int failures = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].error) {
      std::fprintf(stderr, "%s: %s\n", preds[i].sequence.c_str(), preds[i].error->c_str());
      ++failures;
      continue;
    }
    const auto& f = data[i].video.frames.front();
    write_label_pngs(out / preds[i].sequence, preds[i].masks, data[i].frame_stems, f.width(), f.height());
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-prompted video object segmentation engine"};
  app.require_subcommand(1);

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Write a preset synthetic scene as JSON");
  std::string preset_name = "suite:0";
  std::string scene_out;
  NoiseOptions gen_noise;
  gen->add_option("--preset", preset_name, "suite:0..9 | reveal | vanish | three-shapes");
  gen->add_option("--out", scene_out, "Output file (stdout if omitted)");
  gen_noise.add(gen);

  // gen-dataset
  auto* gds = app.add_subcommand("gen-dataset", "Render the ten-scene suite as a DAVIS dataset");
  std::string gds_out;
  NoiseOptions gds_noise;
  gds->add_option("--out", gds_out, "Dataset root")->required();
  gds_noise.add(gds);

  // run-vos
  auto* vos = app.add_subcommand("run-vos", "Semi-supervised run on a DAVIS-layout dataset");
  std::string vos_data, vos_out, vos_score;
  std::optional<std::string> vos_backend;
  std::optional<int> vos_side;
  ConfigOptions vos_cfg;
  vos->add_option("--dataset", vos_data, "Dataset root")->required();
  vos->add_option("--out", vos_out, "Prediction root")->required();
  vos->add_option("--backend", vos_backend, "Protocol address (default: scene oracles)");
  vos->add_option("--longest-side", vos_side, "Resize frames before running");
  vos->add_option("--score", vos_score, "Write scores as JSON");
  vos_cfg.add(vos);

  // run-vis
  auto* vis = app.add_subcommand("run-vis", "Seed objects from first-frame mask proposals");
  std::string vis_data, vis_out;
  std::optional<std::string> vis_backend;
  int vis_max = 10;
  ConfigOptions vis_cfg;
  vis->add_option("--dataset", vis_data, "Dataset root")->required();
  vis->add_option("--out", vis_out, "Prediction root")->required();
  vis->add_option("--backend", vis_backend, "Protocol address (default: scene oracles)");
  vis->add_option("--max-proposals", vis_max, "Objects per video");
  vis_cfg.add(vis);

  // eval
  auto* ev = app.add_subcommand("eval", "Score indexed-PNG predictions against a dataset");
  std::string ev_data, ev_pred, ev_json;
  std::optional<int> ev_tol;
  ev->add_option("--dataset", ev_data, "Dataset root")->required();
  ev->add_option("--pred", ev_pred, "Prediction root (<seq>/<stem>.png)")->required();
  ev->add_option("--json", ev_json, "Write the full report");
  ev->add_option("--tolerance", ev_tol, "Boundary tolerance in px");

  // convert-mots
  auto* mots = app.add_subcommand("convert-mots", "Convert MOTS annotations to DAVIS layout");
  std::string mots_in, mots_out;
  mots->add_option("--in", mots_in, "MOTS root")->required();
  mots->add_option("--out", mots_out, "DAVIS root")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulated clicking annotator");
  std::string sim_method = "offline", sim_data, sim_out;
  std::optional<std::string> sim_backend;
  int sim_budget = 300;
  int sim_iterations = 12;
  NoiseOptions sim_noise;
  sim->add_option("--method", sim_method, "sam-only | online | offline");
  sim->add_option("--budget", sim_budget, "Interactions per object");
  sim->add_option("--dataset", sim_data, "Dataset root (default: synthetic suite)");
  sim->add_option("--backend", sim_backend, "Protocol address (default: scene oracles)");
  sim->add_option("--iterations", sim_iterations, "Refinement iterations per prediction");
  sim->add_option("--out", sim_out, "Curve CSV (budget,mean_iou,sequence)")->required();
  sim_noise.add(sim);

  // serve-backend
  auto* sb = app.add_subcommand("serve-backend", "Serve oracle backends over the wire protocol");
  std::string sb_listen, sb_scene;
  std::optional<int> sb_window;
  bool sb_stdio = false;
  sb->add_option("--listen", sb_listen, "unix:<path> or tcp:<host>:<port>");
  sb->add_flag("--stdio", sb_stdio, "Serve one connection on stdin/stdout");
  sb->add_option("--scene", sb_scene, "Scene JSON")->required();
  sb->add_option("--window", sb_window, "Advertised tracker window size");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the annotation HTTP service");
  std::string srv_host = "127.0.0.1", srv_root;
  int srv_port = 8080;
  std::optional<std::string> srv_backend;
  int srv_max_frames = 2000;
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--port", srv_port, "Port (0 picks one)");
  srv->add_option("--root", srv_root, "Session storage directory");
  srv->add_option("--backend", srv_backend, "Default protocol address for uploads");
  srv->add_option("--max-frames", srv_max_frames, "Upload limit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto spec = preset(preset_name, gen_noise.spec(), gen_noise.seed);
      if (scene_out.empty()) {
        std::cout << json(spec).dump(2) << "\n";
      } else {
        save_scene(spec, scene_out);
      }
    } else if (*gds) {
      const fs::path root(gds_out);
      fs::create_directories(root / "Scenes");
      for (const auto& spec : synthetic_suite(gds_noise.spec(), gds_noise.seed)) {
        auto video = render(spec);
        video.id = spec.name;
        write_davis_sequence(root, video);
        save_scene(spec, (root / "Scenes" / (spec.name + ".json")).string());
      }
      std::printf("wrote %s\n", root.string().c_str());
    } else if (*vos) {
      const auto data = load_davis_dir(vos_data);
      SemisupervisedOptions opts;
      opts.longest_side = vos_side;
      const auto t0 = std::chrono::steady_clock::now();
      const auto preds = run_semisupervised(data, vos_cfg.load(), backend_factory(vos_backend), opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const int failures = write_predictions(data, preds, vos_out);
      const auto score = score_predictions(data, preds);
      print_score(score);
      std::printf("%.2f s\n", secs);
      if (!vos_score.empty()) write_json(vos_score, score);
      return failures == 0 ? 0 : 1;
    } else if (*vis) {
      const auto data = load_davis_dir(vis_data);
      const auto cfg = vis_cfg.load();
      const auto factory = backend_factory(vis_backend);
      std::vector<SequencePrediction> preds;
      for (const auto& dp : data) {
        try {
          preds.push_back(run_first_frame_proposals(dp.video, vis_max, cfg, factory(dp)));
        } catch (const Error& e) {
          preds.push_back({dp.sequence, {}, std::nullopt, e.what()});
        }
        preds.back().sequence = dp.sequence;
      }
      return write_predictions(data, preds, vis_out) == 0 ? 0 : 1;
    } else if (*ev) {
      const auto data = load_davis_dir(ev_data);
      std::vector<SequenceScore> seqs;
      for (const auto& dp : data) {
        const auto pred = read_label_pngs(fs::path(ev_pred) / dp.sequence, dp.frame_stems);
        seqs.push_back(score_sequence(dp.sequence, pred, dp.video.ground_truth, ev_tol));
      }
      const auto score = aggregate(std::move(seqs));
      print_score(score);
      for (const auto& [bucket, b] : score.buckets) {
        std::printf("  %-6s J&F %.4f (%d objects)\n", std::string(to_string(bucket)).c_str(), b.jf,
                    b.objects);
      }
      if (!ev_json.empty()) write_json(ev_json, score);
    } else if (*mots) {
      for (const auto& [seq, conv] : convert_mots(mots_in, mots_out)) {
        std::printf("%s: %zu objects (dropped %d flagged, %d empty, %d over limit)\n", seq.c_str(),
                    conv.objects.size(), conv.dropped_flagged, conv.dropped_empty,
                    conv.dropped_overflow);
        for (const auto& w : conv.warnings) std::fprintf(stderr, "  warning: %s\n", w.c_str());
      }
    } else if (*sim) {
      const auto method = simulation_method_from_string(sim_method);
      SimulationConfig cfg;
      cfg.max_interactions = sim_budget;
      cfg.pipeline.refinement_iterations = sim_iterations;
      std::vector<VosDatapoint> data;
      if (sim_data.empty()) {
        for (const auto& spec : synthetic_suite(sim_noise.spec(), sim_noise.seed)) {
          auto video = render(spec);
          video.id = spec.name;
          auto dp = datapoint_from_video(std::move(video));
          data.push_back(std::move(dp));
        }
      } else {
        data = load_davis_dir(sim_data);
      }
      std::ofstream out(sim_out);
      require(out.good(), ErrorKind::invalid_input, "cannot write " + sim_out);
      out << "budget,mean_iou,sequence\n";
      std::map<int, std::pair<double, int>> overall;
      for (const auto& dp : data) {
        BackendPair backends;
        if (sim_backend) {
          backends = wire::connect_backend(*sim_backend);
        } else if (dp.scene_path) {
          backends = oracle_backends(load_scene(dp.scene_path->string()));
        } else {
          backends = oracle_backends(synthetic_suite(sim_noise.spec(), sim_noise.seed)
                                         .at(static_cast<std::size_t>(&dp - data.data())));
        }
        const auto r = simulate_sequence(method, dp.video, backends, cfg);
        for (const auto& c : r.curve) {
          out << c.budget << "," << c.mean_iou << "," << dp.sequence << "\n";
          overall[c.budget].first += c.mean_iou;
          overall[c.budget].second += 1;
        }
      }
      for (const auto& [b, v] : overall) out << b << "," << v.first / v.second << ",all\n";
      if (!overall.empty()) {
        const auto& last = *overall.rbegin();
        std::printf("budget %d: mean IoU %.4f\n", last.first, last.second.first / last.second.second);
      }
    } else if (*sb) {
      const auto spec = load_scene(sb_scene);
      auto factory = [&] {
        return wire::BackendServer(std::make_shared<OracleTracker>(spec, sb_window),
                                   std::make_shared<OracleSegmenter>(spec));
      };
      if (sb_stdio) {
        wire::FdStream stream(0, 1);
        factory().serve(stream);
        return 0;
      }
      require(!sb_listen.empty(), ErrorKind::invalid_input, "give --listen or --stdio");
      wire::Listener listener(sb_listen);
      std::printf("listening on %s\n", listener.address().c_str());
      std::fflush(stdout);
      wire::serve_forever(listener, factory);
    } else if (*srv) {
      ServiceOptions opts;
      if (!srv_root.empty()) opts.store.root = srv_root;
      opts.store.default_backend = srv_backend;
      opts.store.max_frames = srv_max_frames;
      AnnotationService service(opts);
      const int port = service.bind(srv_host, srv_port);
      std::printf("serving on http://%s:%d\n", srv_host.c_str(), port);
      std::fflush(stdout);
      service.listen();
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
