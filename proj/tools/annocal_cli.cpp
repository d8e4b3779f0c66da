// annocal command-line front-end.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "annocal/annocal.hpp"

namespace fs = std::filesystem;
using namespace annocal;

namespace
{

struct RunConfig
{
  std::string subcommand;
  std::string annotations;
  std::string predictions;
  std::string clusters;
  std::string pairing;
  std::string bank;
  std::string sim_config;
  std::string out = ".";
  double min_iou = kDefaultMinIou;
  double gamma = kDefaultGamma;
  double lambda = kDefaultLambda;
  int bins = kDefaultBins;
  double var_floor = kDefaultVarFloor;
  std::string certainty_source;  // empty: take from the dataset meta
  std::optional<double> min_certainty;
  std::optional<std::uint64_t> seed;
  std::string zero_iou = "void";
  std::string kind = "class_label";
  std::string renormalization = "proportional";
  std::string variance_space = "linear";
  std::string background = "keep";
  double beta = 1.0;
  double var_scale = 1.0;
  bool per_image = false;

  json to_json() const
  {
    json j;
    j["subcommand"] = subcommand;
    auto path = [&](const char* key, const std::string& v) {
      if (!v.empty()) j[key] = v;
    };
    path("annotations", annotations);
    path("predictions", predictions);
    path("clusters", clusters);
    path("pairing", pairing);
    path("bank", bank);
    path("config", sim_config);
    j["out"] = out;
    j["min_iou"] = min_iou;
    j["gamma"] = gamma;
    j["lambda"] = lambda;
    j["bins"] = bins;
    j["var_floor"] = var_floor;
    j["certainty_source"] = certainty_source.empty() ? json(nullptr) : json(certainty_source);
    j["min_certainty"] = min_certainty ? json(*min_certainty) : json(nullptr);
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["zero_iou_policy"] = zero_iou;
    j["kind"] = kind;
    j["renormalization"] = renormalization;
    j["variance_space"] = variance_space;
    j["background_mode"] = background;
    j["beta"] = beta;
    j["var_scale"] = var_scale;
    j["per_image"] = per_image;
    return j;
  }

  EvaluationConfig evaluation() const
  {
    EvaluationConfig e;
    e.cluster.min_iou = min_iou;
    e.cluster.gamma = gamma;
    e.match.var_floor = var_floor;
    e.match.zero_iou = zero_iou == "forbid" ? ZeroIouPolicy::forbid_before_assignment
                                            : ZeroIouPolicy::void_after_assignment;
    e.min_certainty = min_certainty;
    e.per_image = per_image;
    return e;
  }

  DatasetMeta resolve_meta(DatasetMeta meta) const
  {
    if (!certainty_source.empty()) meta.certainty_source = certainty_source_from_string(certainty_source);
    return meta;
  }
};

std::string pct(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

fs::path output_dir(const RunConfig& cfg)
{
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

void stage_config(OutputTransaction& tx, const fs::path& dir, const RunConfig& cfg)
{
  tx.stage(dir / "config.json", canonical_dump(cfg.to_json()));
}

void check_shared_images(std::span<const ImageAnnotations> images, std::span<const Prediction> preds)
{
  if (preds.empty()) return;
  std::set<std::string> ids;
  for (const auto& im : images) ids.insert(im.image_id);
  for (const auto& p : preds)
    if (ids.count(p.image_id)) return;
  throw Error("annotations and predictions share no image ids");
}

ReliabilityKind parse_kind(const std::string& s)
{
  if (s == "class_label") return ReliabilityKind::class_label;
  if (s == "bounding_box") return ReliabilityKind::bounding_box;
  throw Error("unknown reliability kind '" + s + "'");
}

BackgroundMode parse_background(const std::string& s)
{
  if (s == "keep") return BackgroundMode::keep;
  if (s == "objectness") return BackgroundMode::objectness;
  if (s == "drop") return BackgroundMode::drop;
  throw Error("unknown background mode '" + s + "'");
}

int cmd_cluster(const RunConfig& cfg)
{
  const auto file = load_annotation_file(cfg.annotations);
  const auto meta = cfg.resolve_meta(file.meta);
  const auto matched = match_dataset(file.images, {}, meta, cfg.evaluation());

  std::vector<std::vector<AnnotationCluster>> all;
  std::map<int, std::size_t> per_class;
  std::size_t total = 0;
  for (const auto& img : matched.images)
  {
    for (const auto& c : img.clusters)
    {
      ++per_class[predicted_class(c.soft_label)];
      ++total;
    }
    all.push_back(img.clusters);
  }
  const auto alpha = krippendorff_alpha(all, meta);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "clusters.json", canonical_dump(clusters_to_json(meta, matched)));
  stage_config(tx, dir, cfg);
  tx.commit();

  std::cout << "clusters (H): " << total << "\n";
  for (const auto& [cls, n] : per_class)
    std::cout << "  class " << cls << " (" << meta.class_names[static_cast<std::size_t>(cls - 1)]
              << "): " << n << "\n";
  if (alpha.alpha)
    std::cout << "krippendorff alpha: " << format_double(*alpha.alpha) << "\n";
  else
    std::cout << "krippendorff alpha: insufficient data\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg)
{
  const auto file = load_annotation_file(cfg.annotations);
  const auto meta = cfg.resolve_meta(file.meta);
  const auto preds = load_predictions(cfg.predictions, meta);
  check_shared_images(file.images, preds);

  const auto ecfg = cfg.evaluation();
  const auto matched = match_dataset(file.images, preds, meta, ecfg);
  const auto report = evaluate_matched(matched, meta, ecfg);
  const auto cls_bins = reliability_bins(matched, cfg.bins, ReliabilityKind::class_label, cfg.gamma);
  const auto box_bins = reliability_bins(matched, cfg.bins, ReliabilityKind::bounding_box, cfg.gamma);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "metrics.json", canonical_dump(metrics_report_to_json(report)));
  tx.stage(dir / "reliability.csv", reliability_csv(cls_bins));
  tx.stage(dir / "reliability_box.csv", reliability_csv(box_bins));
  tx.stage(dir / "matches.json", canonical_dump(matches_to_json(matched)));
  stage_config(tx, dir, cfg);
  tx.commit();

  const auto& v = report.values;
  std::cout << "TVD     " << pct(v.tvd) << "\n"
            << "TVD_FP  " << pct(v.tvd_fp) << "\n"
            << "LUE     " << (v.lue ? pct(*v.lue) : std::string("undefined")) << "\n"
            << "FNE     " << pct(v.fne) << "\n"
            << "mean    " << pct(v.mean) << "\n"
            << "TP " << v.tp << "  FP " << v.fp << "  FN " << v.fn << "\n";
  if (report.unknown_image_predictions)
    std::cout << "warning: " << report.unknown_image_predictions
              << " predictions reference images without annotations\n";
  return 0;
}

int cmd_reliability(const RunConfig& cfg)
{
  const auto file = load_annotation_file(cfg.annotations);
  const auto meta = cfg.resolve_meta(file.meta);
  const auto preds = load_predictions(cfg.predictions, meta);
  check_shared_images(file.images, preds);
  const auto matched = match_dataset(file.images, preds, meta, cfg.evaluation());
  const auto bins = reliability_bins(matched, cfg.bins, parse_kind(cfg.kind), cfg.gamma);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "reliability.csv", reliability_csv(bins));
  stage_config(tx, dir, cfg);
  tx.commit();
  std::cout << reliability_csv(bins);
  return 0;
}

int cmd_fit_calib(const RunConfig& cfg)
{
  const auto file = load_annotation_file(cfg.annotations);
  const auto meta = cfg.resolve_meta(file.meta);
  const auto preds = load_predictions(cfg.predictions, meta);
  check_shared_images(file.images, preds);

  PosthocConfig pcfg;
  pcfg.eval = cfg.evaluation();
  pcfg.variance_space = input_space_from_string(cfg.variance_space);
  const auto bank = fit_calibrator_bank(file.images, preds, meta, pcfg);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "bank.json", canonical_dump(bank_to_json(bank)));
  stage_config(tx, dir, cfg);
  tx.commit();
  std::cout << "fitted " << bank.class_maps.size() + bank.var_maps.size() << " calibrators on "
            << bank.fingerprint.num_pairs << " matched pairs\n";
  if (!bank.fingerprint.identity_classes.empty())
    std::cout << "warning: " << bank.fingerprint.identity_classes.size()
              << " classes had no training points and use the identity map\n";
  return 0;
}

int cmd_apply_calib(const RunConfig& cfg)
{
  const auto bank = bank_from_json(parse_json_file(cfg.bank));
  DatasetMeta meta;
  if (!cfg.annotations.empty())
  {
    meta = load_annotation_file(cfg.annotations).meta;
    if (meta.num_classes != bank.num_classes())
      throw Error("calibrator bank has " + std::to_string(bank.num_classes()) +
                  " classes but the dataset meta has " + std::to_string(meta.num_classes));
  }
  else
  {
    meta.num_classes = bank.num_classes();
    meta.num_annotators = std::max(2, bank.fingerprint.num_annotators);
    for (int j = 1; j <= meta.num_classes; ++j) meta.class_names.push_back("class_" + std::to_string(j));
  }
  meta = cfg.resolve_meta(meta);
  const auto preds = load_predictions(cfg.predictions, meta);
  const auto mode = cfg.renormalization == "printed" ? RenormalizationMode::printed
                                                     : RenormalizationMode::proportional;
  std::vector<Prediction> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(calibrate_prediction(p, bank, mode));

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "predictions.json", canonical_dump(predictions_to_json(out)));
  stage_config(tx, dir, cfg);
  tx.commit();
  std::cout << "calibrated " << out.size() << " predictions\n";
  return 0;
}

SimulationConfig default_simulation()
{
  SimulationConfig c;
  c.num_images = 100;
  c.num_classes = 10;
  // two careful annotators and three average ones
  c.annotators = {{0.74, 0.05, 0.02, 0.05}, {0.74, 0.05, 0.02, 0.05}, {0.55, 0.1, 0.04, 0.1},
                  {0.55, 0.1, 0.04, 0.1},   {0.55, 0.1, 0.04, 0.1}};
  return c;
}

int cmd_simulate(const RunConfig& cfg)
{
  SimulationConfig sc = cfg.sim_config.empty() ? default_simulation()
                                               : simulation_config_from_json(parse_json_file(cfg.sim_config));
  if (cfg.seed) sc.seed = *cfg.seed;
  const auto data = simulate_dataset(sc);
  auto meta = cfg.resolve_meta(data.meta);
  Miscalibration mis;
  mis.beta = cfg.beta;
  mis.var_scale = cfg.var_scale;
  mis.var_floor = cfg.var_floor;
  ClusterOptions copt;
  copt.min_iou = cfg.min_iou;
  copt.gamma = cfg.gamma;
  const auto preds = simulate_predictions(data.images, meta, mis, copt);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "annotations.json", canonical_dump(annotations_to_json(meta, data.images)));
  tx.stage(dir / "predictions.json", canonical_dump(predictions_to_json(preds)));
  tx.stage(dir / "latent.json", canonical_dump(latent_to_json(data.latent)));
  tx.stage(dir / "simulation.json", canonical_dump(simulation_config_to_json(sc)));
  stage_config(tx, dir, cfg);
  tx.commit();
  std::size_t n_ann = 0;
  for (const auto& im : data.images) n_ann += im.annotations.size();
  std::cout << "simulated " << data.images.size() << " images, " << n_ann << " annotations, "
            << preds.size() << " predictions\n";
  return 0;
}

int cmd_loss_eval(const RunConfig& cfg)
{
  const auto cf = load_cluster_file(cfg.clusters, cfg.gamma);
  const auto meta = cfg.resolve_meta(cf.meta);
  const auto preds = load_predictions(cfg.predictions, meta);
  const auto pairing = load_pairing(cfg.pairing);
  const auto grouped = group_predictions(preds);

  std::map<std::string, const std::vector<AnnotationCluster>*> clusters_by_id;
  for (const auto& [id, cl] : cf.images) clusters_by_id[id] = &cl;

  LossConfig lcfg;
  lcfg.lambda = cfg.lambda;
  lcfg.gamma = cfg.gamma;
  lcfg.background = parse_background(cfg.background);

  json images = json::array();
  double sum_cls = 0.0, sum_reg = 0.0;
  std::size_t n_pairs = 0;
  const std::vector<AnnotationCluster> no_clusters;
  const std::vector<Prediction> no_preds;
  for (const auto& [id, pairs] : pairing)
  {
    auto cit = clusters_by_id.find(id);
    auto pit = grouped.find(id);
    const auto& cl = cit != clusters_by_id.end() ? *cit->second : no_clusters;
    const auto& pr = pit != grouped.end() ? pit->second : no_preds;
    const auto loss = image_loss(cl, pr, pairs, meta, lcfg);
    json ji = loss_to_json(loss);
    ji["image_id"] = id;
    images.push_back(std::move(ji));
    sum_cls += loss.l_cls * static_cast<double>(pairs.size());
    sum_reg += loss.l_reg * static_cast<double>(pairs.size());
    n_pairs += pairs.size();
  }
  json root;
  const double l_cls = n_pairs ? sum_cls / static_cast<double>(n_pairs) : 0.0;
  const double l_reg = n_pairs ? sum_reg / static_cast<double>(n_pairs) : 0.0;
  root["l_cls"] = l_cls;
  root["l_reg"] = l_reg;
  root["l_total"] = cfg.lambda * l_reg + l_cls;
  root["lambda"] = cfg.lambda;
  root["num_pairs"] = n_pairs;
  root["images"] = std::move(images);

  const auto dir = output_dir(cfg);
  OutputTransaction tx;
  tx.stage(dir / "loss.json", canonical_dump(root));
  stage_config(tx, dir, cfg);
  tx.commit();
  std::cout << "pairs " << n_pairs << "  L_c " << format_double(l_cls) << "  L_r "
            << format_double(l_reg) << "  L_t " << format_double(cfg.lambda * l_reg + l_cls) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Calibration evaluation for probabilistic object detectors against multi-annotator labels"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sub->add_option("--min-iou", cfg.min_iou, "Minimum IoU for merging annotations into a cluster")
        ->capture_default_str();
    sub->add_option("--gamma", cfg.gamma, "Maximum confidence level")->capture_default_str();
    sub->add_option("--var-floor", cfg.var_floor, "Variance floor in px^2")->capture_default_str();
    sub->add_option("--certainty-source", cfg.certainty_source,
                    "Override certainty source: foreground, objectness or max_class");
  };
  auto eval_opts = [&](CLI::App* sub) {
    sub->add_option("--min-certainty", cfg.min_certainty, "Drop predictions below this certainty");
    sub->add_option("--zero-iou-policy", cfg.zero_iou, "void (after assignment) or forbid (before)")
        ->check(CLI::IsMember({"void", "forbid"}))
        ->capture_default_str();
  };

  auto* cluster = app.add_subcommand("cluster", "Cluster annotations and report agreement");
  cluster->add_option("--annotations", cfg.annotations)->required();
  common(cluster);

  auto* evaluate = app.add_subcommand("evaluate", "Compute TVD, TVD_FP, LUE, FNE and their mean");
  evaluate->add_option("--annotations", cfg.annotations)->required();
  evaluate->add_option("--predictions", cfg.predictions)->required();
  evaluate->add_option("--bins", cfg.bins)->capture_default_str();
  evaluate->add_flag("--per-image", cfg.per_image, "Include per-image metrics");
  common(evaluate);
  eval_opts(evaluate);

  auto* reliability = app.add_subcommand("reliability", "Reliability diagram data as CSV");
  reliability->add_option("--annotations", cfg.annotations)->required();
  reliability->add_option("--predictions", cfg.predictions)->required();
  reliability->add_option("--bins", cfg.bins)->capture_default_str();
  reliability->add_option("--kind", cfg.kind)
      ->check(CLI::IsMember({"class_label", "bounding_box"}))
      ->capture_default_str();
  common(reliability);
  eval_opts(reliability);

  auto* fit = app.add_subcommand("fit-calib", "Fit the isotonic calibrator bank on validation data");
  fit->add_option("--annotations", cfg.annotations)->required();
  fit->add_option("--predictions", cfg.predictions)->required();
  fit->add_option("--variance-space", cfg.variance_space)
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  common(fit);
  eval_opts(fit);

  auto* apply = app.add_subcommand("apply-calib", "Apply a calibrator bank to predictions");
  apply->add_option("--bank", cfg.bank)->required();
  apply->add_option("--predictions", cfg.predictions)->required();
  apply->add_option("--annotations", cfg.annotations, "Annotations file whose meta must match the bank");
  apply->add_option("--renormalization", cfg.renormalization)
      ->check(CLI::IsMember({"proportional", "printed"}))
      ->capture_default_str();
  common(apply);

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic multi-annotator dataset");
  simulate->add_option("--config", cfg.sim_config, "Simulation config JSON");
  simulate->add_option("--seed", cfg.seed, "Override the config seed");
  simulate->add_option("--beta", cfg.beta, "Confidence exponent of the oracle predictions")
      ->capture_default_str();
  simulate->add_option("--var-scale", cfg.var_scale, "Variance scale of the oracle predictions")
      ->capture_default_str();
  common(simulate);

  auto* loss = app.add_subcommand("loss-eval", "Evaluate the training loss on given pairs");
  loss->add_option("--clusters", cfg.clusters)->required();
  loss->add_option("--predictions", cfg.predictions)->required();
  loss->add_option("--pairing", cfg.pairing, "matches.json-style file; its tp lists are used")->required();
  loss->add_option("--lambda", cfg.lambda)->capture_default_str();
  loss->add_option("--background-mode", cfg.background)
      ->check(CLI::IsMember({"keep", "objectness", "drop"}))
      ->capture_default_str();
  common(loss);

  CLI11_PARSE(app, argc, argv);

  cfg.subcommand = app.get_subcommands().front()->get_name();
  try
  {
    if (cluster->parsed()) return cmd_cluster(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (reliability->parsed()) return cmd_reliability(cfg);
    if (fit->parsed()) return cmd_fit_calib(cfg);
    if (apply->parsed()) return cmd_apply_calib(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (loss->parsed()) return cmd_loss_eval(cfg);
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
