#ifndef ANNOCAL_IO_HPP_
#define ANNOCAL_IO_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annocal/core.hpp"
#include "annocal/metrics.hpp"
#include "annocal/posthoc.hpp"
#include "annocal/preprocess.hpp"
#include "annocal/simulate.hpp"
#include "annocal/train_loss.hpp"

namespace annocal
{

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Canonical text form: 17 significant digits for every float, scalar arrays
// on one line, two-space indentation.

inline std::string format_double(double x)
{
  if (!std::isfinite(x)) throw Error("cannot serialize non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail
{

inline bool is_scalar(const json& j) { return !j.is_array() && !j.is_object(); }

inline void dump_canonical(const json& j, std::string& out, int level)
{
  const std::string pad(static_cast<std::size_t>(2 * level), ' ');
  const std::string pad_in(static_cast<std::size_t>(2 * (level + 1)), ' ');
  switch (j.type())
  {
  case json::value_t::number_float: out += format_double(j.get<double>()); return;
  case json::value_t::array:
  {
    if (j.empty())
    {
      out += "[]";
      return;
    }
    const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return is_scalar(e); });
    out += '[';
    bool first = true;
    for (const auto& e : j)
    {
      if (!first) out += flat ? ", " : ",";
      first = false;
      if (!flat) out += "\n" + pad_in;
      dump_canonical(e, out, level + 1);
    }
    if (!flat) out += "\n" + pad;
    out += ']';
    return;
  }
  case json::value_t::object:
  {
    if (j.empty())
    {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it)
    {
      out += first ? "\n" : ",\n";
      first = false;
      out += pad_in + json(it.key()).dump() + ": ";
      dump_canonical(it.value(), out, level + 1);
    }
    out += "\n" + pad + '}';
    return;
  }
  default: out += j.dump(); return;
  }
}

} // namespace detail

inline std::string canonical_dump(const json& j)
{
  std::string out;
  detail::dump_canonical(j, out, 0);
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::filesystem::path& path)
{
  const auto text = read_text_file(path);
  try
  {
    return json::parse(text);
  }
  catch (const json::exception& e)
  {
    throw Error("'" + path.string() + "': malformed JSON: " + e.what());
  }
}

/// Writes a group of output files all-or-nothing: contents go to temporary
/// siblings and are renamed into place by commit(). Uncommitted temporaries
/// are removed on destruction.
class OutputTransaction
{
public:
  OutputTransaction() = default;
  OutputTransaction(const OutputTransaction&) = delete;
  OutputTransaction& operator=(const OutputTransaction&) = delete;

  ~OutputTransaction()
  {
    std::error_code ec;
    for (const auto& [tmp, dst] : staged_) std::filesystem::remove(tmp, ec);
  }

  void stage(const std::filesystem::path& dst, const std::string& content)
  {
    auto tmp = dst;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + tmp.string() + "'");
      out << content;
      if (!out.flush()) throw Error("failed writing '" + tmp.string() + "'");
    }
    staged_.emplace_back(tmp, dst);
  }

  void commit()
  {
    for (const auto& [tmp, dst] : staged_) std::filesystem::rename(tmp, dst);
    staged_.clear();
  }

private:
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
};

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
  OutputTransaction tx;
  tx.stage(path, content);
  tx.commit();
}

// ---------------------------------------------------------------------------
// Small helpers

namespace detail
{

inline json box_json(const Box& b) { return json::array({b[0], b[1], b[2], b[3]}); }

inline Box box_from(const json& j)
{
  if (!j.is_array() || j.size() != 4) throw Error("expected an array of 4 numbers");
  Box b{};
  for (std::size_t i = 0; i < 4; ++i) b[i] = j.at(i).get<double>();
  return b;
}

inline json doubles_json(const std::vector<double>& v)
{
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline std::vector<double> doubles_from(const json& j)
{
  if (!j.is_array()) throw Error("expected an array of numbers");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(e.get<double>());
  return v;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename F>
auto with_context(const std::string& where, F&& f) -> decltype(f())
{
  try
  {
    return f();
  }
  catch (const json::exception& e)
  {
    throw Error(where + ": schema violation: " + e.what());
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dataset meta and annotations

inline json meta_to_json(const DatasetMeta& meta)
{
  json j;
  j["num_classes"] = meta.num_classes;
  j["num_annotators"] = meta.num_annotators;
  j["class_names"] = meta.class_names;
  j["certainty_source"] = to_string(meta.certainty_source);
  return j;
}

inline DatasetMeta meta_from_json(const json& j)
{
  DatasetMeta m;
  m.num_classes = j.at("num_classes").get<int>();
  m.num_annotators = j.at("num_annotators").get<int>();
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.certainty_source = certainty_source_from_string(j.value("certainty_source", std::string("foreground")));
  m.validate();
  return m;
}

struct AnnotationFile
{
  DatasetMeta meta;
  std::vector<ImageAnnotations> images;
};

/// Validate annotations against the meta and clamp boxes to the image.
inline std::vector<ImageAnnotations> parse_annotations(const json& root, const DatasetMeta& meta)
{
  std::vector<ImageAnnotations> images;
  for (const auto& ji : root.at("images"))
  {
    ImageAnnotations img;
    img.image_id = ji.at("image_id").get<std::string>();
    img.width = ji.at("width").get<double>();
    img.height = ji.at("height").get<double>();
    if (!(img.width > 0.0) || !(img.height > 0.0))
      throw Error("image '" + img.image_id + "': width and height must be positive");
    std::size_t idx = 0;
    for (const auto& ja : ji.at("annotations"))
    {
      const std::string where = "image '" + img.image_id + "' annotation " + std::to_string(idx++);
      Annotation a;
      a.box = detail::box_from(ja.at("box"));
      a.class_id = ja.at("class_id").get<int>();
      a.annotator_id = ja.at("annotator_id").get<int>();
      if (a.class_id < 1 || a.class_id > meta.num_classes)
        throw Error(where + ": class_id " + std::to_string(a.class_id) + " outside 1.." +
                    std::to_string(meta.num_classes));
      if (a.annotator_id < 1 || a.annotator_id > meta.num_annotators)
        throw Error(where + ": annotator_id " + std::to_string(a.annotator_id) + " outside 1.." +
                    std::to_string(meta.num_annotators));
      if (!is_valid_box(a.box)) throw Error(where + ": degenerate box");
      a.box = {std::clamp(a.box[0], 0.0, img.width), std::clamp(a.box[1], 0.0, img.height),
               std::clamp(a.box[2], 0.0, img.width), std::clamp(a.box[3], 0.0, img.height)};
      if (!is_valid_box(a.box)) throw Error(where + ": box lies outside the image");
      img.annotations.push_back(a);
    }
    images.push_back(std::move(img));
  }
  return images;
}

inline AnnotationFile load_annotation_file(const std::filesystem::path& path)
{
  const auto root = parse_json_file(path);
  return detail::with_context("'" + path.string() + "'", [&] {
    AnnotationFile f;
    f.meta = meta_from_json(root.at("meta"));
    f.images = parse_annotations(root, f.meta);
    return f;
  });
}

/// Load annotations, checking them against a caller-supplied meta.
inline std::vector<ImageAnnotations> load_annotations(const std::filesystem::path& path,
                                                      const DatasetMeta& meta)
{
  const auto root = parse_json_file(path);
  return detail::with_context("'" + path.string() + "'", [&] { return parse_annotations(root, meta); });
}

inline json annotations_to_json(const DatasetMeta& meta, std::span<const ImageAnnotations> images)
{
  json root;
  root["meta"] = meta_to_json(meta);
  json arr = json::array();
  for (const auto& img : images)
  {
    json ji;
    ji["image_id"] = img.image_id;
    ji["width"] = img.width;
    ji["height"] = img.height;
    json anns = json::array();
    for (const auto& a : img.annotations)
    {
      json ja;
      ja["box"] = detail::box_json(a.box);
      ja["class_id"] = a.class_id;
      ja["annotator_id"] = a.annotator_id;
      anns.push_back(std::move(ja));
    }
    ji["annotations"] = std::move(anns);
    arr.push_back(std::move(ji));
  }
  root["images"] = std::move(arr);
  return root;
}

// ---------------------------------------------------------------------------
// Predictions

inline constexpr double kProbSumTolerance = 1e-6;

inline std::vector<Prediction> parse_predictions(const json& root, const DatasetMeta& meta)
{
  std::vector<Prediction> preds;
  const auto expected = static_cast<std::size_t>(meta.num_classes) + 1;
  std::size_t idx = 0;
  for (const auto& jp : root.at("predictions"))
  {
    Prediction p;
    p.image_id = jp.at("image_id").get<std::string>();
    const std::string where = "prediction " + std::to_string(idx++) + " (image '" + p.image_id + "')";
    p.mean = detail::box_from(jp.at("mean"));
    p.var = detail::box_from(jp.at("var"));
    p.class_probs = detail::doubles_from(jp.at("class_probs"));
    if (!is_valid_box(p.mean)) throw Error(where + ": degenerate mean box");
    for (double v : p.var)
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(where + ": negative or non-finite variance");
    if (p.class_probs.size() != expected)
      throw Error(where + ": expected " + std::to_string(expected) + " class probabilities, got " +
                  std::to_string(p.class_probs.size()));
    double total = 0.0;
    for (double x : p.class_probs)
    {
      if (!(x >= 0.0 && x <= 1.0)) throw Error(where + ": class probability outside [0,1]");
      total += x;
    }
    if (std::abs(total - 1.0) > kProbSumTolerance)
      throw Error(where + ": class probabilities sum to " + format_double(total));
    // rounding-level deviations are kept as written
    const double rounding = 4.0 * static_cast<double>(expected) * std::numeric_limits<double>::epsilon();
    if (std::abs(total - 1.0) > rounding)
      for (auto& x : p.class_probs) x /= total;

    if (jp.contains("certainty") && !jp.at("certainty").is_null())
    {
      p.certainty = jp.at("certainty").get<double>();
      if (!(p.certainty >= 0.0 && p.certainty <= 1.0)) throw Error(where + ": certainty outside [0,1]");
    }
    else
    {
      p.certainty = derive_certainty(p.class_probs, meta.certainty_source);
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path,
                                                const DatasetMeta& meta)
{
  const auto root = parse_json_file(path);
  return detail::with_context("'" + path.string() + "'", [&] { return parse_predictions(root, meta); });
}

inline json predictions_to_json(std::span<const Prediction> preds)
{
  json arr = json::array();
  for (const auto& p : preds)
  {
    json jp;
    jp["image_id"] = p.image_id;
    jp["mean"] = detail::box_json(p.mean);
    jp["var"] = detail::box_json(p.var);
    jp["class_probs"] = detail::doubles_json(p.class_probs);
    jp["certainty"] = p.certainty;
    arr.push_back(std::move(jp));
  }
  json root;
  root["predictions"] = std::move(arr);
  return root;
}

// ---------------------------------------------------------------------------
// Clusters and matches

inline json clusters_to_json(const DatasetMeta& meta, const DatasetMatch& matched)
{
  json images = json::array();
  for (const auto& img : matched.images)
  {
    if (!img.known) continue;
    json ji;
    ji["image_id"] = img.image_id;
    json cl = json::array();
    for (const auto& c : img.clusters)
    {
      json jc;
      json members = json::array();
      for (const auto& m : c.members)
      {
        json jm;
        jm["index"] = m.index;
        jm["box"] = detail::box_json(m.annotation.box);
        jm["class_id"] = m.annotation.class_id;
        jm["annotator_id"] = m.annotation.annotator_id;
        members.push_back(std::move(jm));
      }
      jc["members"] = std::move(members);
      jc["soft_label"] = detail::doubles_json(c.soft_label);
      jc["mean_box"] = detail::box_json(c.mean_box);
      jc["min_box"] = detail::box_json(c.min_box);
      jc["max_box"] = detail::box_json(c.max_box);
      jc["annotator_certainty"] = c.annotator_certainty;
      jc["target_var"] = detail::box_json(c.target_var);
      cl.push_back(std::move(jc));
    }
    ji["clusters"] = std::move(cl);
    images.push_back(std::move(ji));
  }
  json root;
  root["meta"] = meta_to_json(meta);
  root["images"] = std::move(images);
  return root;
}

struct ClusterFile
{
  DatasetMeta meta;
  std::vector<std::pair<std::string, std::vector<AnnotationCluster>>> images;
};

/// Reads a clusters dump. Derived fields are recomputed from the members.
inline ClusterFile load_cluster_file(const std::filesystem::path& path, double gamma = kDefaultGamma)
{
  const auto root = parse_json_file(path);
  return detail::with_context("'" + path.string() + "'", [&] {
    ClusterFile f;
    f.meta = meta_from_json(root.at("meta"));
    for (const auto& ji : root.at("images"))
    {
      std::vector<AnnotationCluster> clusters;
      for (const auto& jc : ji.at("clusters"))
      {
        AnnotationCluster c;
        for (const auto& jm : jc.at("members"))
        {
          ClusterMember m;
          m.index = jm.at("index").get<std::size_t>();
          m.annotation.box = detail::box_from(jm.at("box"));
          m.annotation.class_id = jm.at("class_id").get<int>();
          m.annotation.annotator_id = jm.at("annotator_id").get<int>();
          c.members.push_back(m);
        }
        finalize_cluster(c, f.meta.num_classes, f.meta.num_annotators, gamma);
        clusters.push_back(std::move(c));
      }
      f.images.emplace_back(ji.at("image_id").get<std::string>(), std::move(clusters));
    }
    return f;
  });
}

/// Per-image TP/FP/FN dump. Prediction indices refer to the order of that
/// image's predictions in the predictions file.
inline json matches_to_json(const DatasetMatch& matched)
{
  json images = json::array();
  for (const auto& img : matched.images)
  {
    json ji;
    ji["image_id"] = img.image_id;
    json tp = json::array();
    for (const auto& [n, h] : img.outcome.tp) tp.push_back(json::array({n, h}));
    ji["tp"] = std::move(tp);
    ji["fp"] = img.outcome.fp;
    ji["fn"] = img.outcome.fn;
    images.push_back(std::move(ji));
  }
  json root;
  root["images"] = std::move(images);
  return root;
}

/// (image_id, TP pairs as (prediction, cluster)) from a matches/pairing file.
inline std::vector<std::pair<std::string, std::vector<IndexPair>>> load_pairing(
    const std::filesystem::path& path)
{
  const auto root = parse_json_file(path);
  return detail::with_context("'" + path.string() + "'", [&] {
    std::vector<std::pair<std::string, std::vector<IndexPair>>> out;
    for (const auto& ji : root.at("images"))
    {
      std::vector<IndexPair> pairs;
      for (const auto& jp : ji.at("tp"))
        pairs.emplace_back(jp.at(0).get<std::size_t>(), jp.at(1).get<std::size_t>());
      out.emplace_back(ji.at("image_id").get<std::string>(), std::move(pairs));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Metrics, reliability, loss

inline json metric_values_to_json(const MetricValues& v)
{
  json j;
  j["tvd"] = v.tvd;
  j["tvd_fp"] = v.tvd_fp;
  j["lue"] = detail::optional_json(v.lue);
  j["fne"] = v.fne;
  j["mean"] = v.mean;
  j["counts"] = json{{"tp", v.tp}, {"fp", v.fp}, {"fn", v.fn}};
  return j;
}

inline MetricValues metric_values_from_json(const json& j)
{
  MetricValues v;
  v.tvd = j.at("tvd").get<double>();
  v.tvd_fp = j.at("tvd_fp").get<double>();
  if (!j.at("lue").is_null()) v.lue = j.at("lue").get<double>();
  v.fne = j.at("fne").get<double>();
  v.mean = j.at("mean").get<double>();
  v.tp = j.at("counts").at("tp").get<std::size_t>();
  v.fp = j.at("counts").at("fp").get<std::size_t>();
  v.fn = j.at("counts").at("fn").get<std::size_t>();
  return v;
}

inline json metrics_report_to_json(const MetricsReport& r)
{
  json j = metric_values_to_json(r.values);
  j["unknown_image_predictions"] = r.unknown_image_predictions;
  if (!r.per_image.empty())
  {
    json per = json::array();
    for (const auto& im : r.per_image)
    {
      json e;
      e["image_id"] = im.image_id;
      const json values = metric_values_to_json(im.values);
      for (const auto& [k, v] : values.items()) e[k] = v;
      per.push_back(std::move(e));
    }
    j["per_image"] = std::move(per);
  }
  return j;
}

inline MetricsReport metrics_report_from_json(const json& j)
{
  MetricsReport r;
  r.values = metric_values_from_json(j);
  r.unknown_image_predictions = j.value("unknown_image_predictions", std::size_t{0});
  if (j.contains("per_image"))
    for (const auto& e : j.at("per_image"))
      r.per_image.push_back({e.at("image_id").get<std::string>(), metric_values_from_json(e)});
  return r;
}

inline std::string reliability_csv(const ReliabilityBins& bins)
{
  std::string out = "bin_lo,bin_hi,mean_conf,mean_agreement,sample_fraction\n";
  for (std::size_t i = 0; i + 1 < bins.edges.size(); ++i)
  {
    out += format_double(bins.edges[i]) + "," + format_double(bins.edges[i + 1]) + ",";
    out += (bins.mean_confidence[i] ? format_double(*bins.mean_confidence[i]) : "") + ",";
    out += (bins.mean_agreement[i] ? format_double(*bins.mean_agreement[i]) : "") + ",";
    out += format_double(bins.sample_fraction[i]) + "\n";
  }
  return out;
}

inline json loss_to_json(const LossBreakdown& l)
{
  json j;
  j["l_cls"] = l.l_cls;
  j["l_reg"] = l.l_reg;
  j["l_total"] = l.l_total;
  j["lambda"] = l.lambda;
  j["empty_pairing"] = l.empty_pairing;
  json per = json::array();
  for (const auto& p : l.per_pair)
    per.push_back(json{{"pair", p.pair}, {"l_cls", p.l_cls}, {"l_reg", p.l_reg}, {"l_total", p.l_total}});
  j["per_pair"] = std::move(per);
  return j;
}

// ---------------------------------------------------------------------------
// Calibrator bank

inline json isotonic_map_to_json(const IsotonicMap& m)
{
  json j;
  j["domain"] = to_string(m.domain);
  j["input_space"] = to_string(m.input_space);
  j["breakpoints"] = detail::doubles_json(m.breakpoints);
  j["values"] = detail::doubles_json(m.values);
  return j;
}

inline IsotonicMap isotonic_map_from_json(const json& j)
{
  IsotonicMap m;
  m.domain = map_domain_from_string(j.at("domain").get<std::string>());
  m.input_space = input_space_from_string(j.value("input_space", std::string("linear")));
  m.breakpoints = detail::doubles_from(j.at("breakpoints"));
  m.values = detail::doubles_from(j.at("values"));
  if (m.breakpoints.size() != m.values.size()) throw Error("isotonic map: breakpoints/values length mismatch");
  for (std::size_t i = 1; i < m.breakpoints.size(); ++i)
    if (!(m.breakpoints[i] > m.breakpoints[i - 1]) || m.values[i] < m.values[i - 1])
      throw Error("isotonic map is not monotone");
  return m;
}

inline json bank_to_json(const CalibratorBank& bank)
{
  json root;
  json classes = json::array();
  for (std::size_t j = 0; j < bank.class_maps.size(); ++j)
  {
    json jc;
    jc["class_id"] = j + 1;
    const json map = isotonic_map_to_json(bank.class_maps[j]);
    for (const auto& [k, v] : map.items()) jc[k] = v;
    classes.push_back(std::move(jc));
  }
  root["classes"] = std::move(classes);
  json coords = json::array();
  for (const auto& m : bank.var_maps) coords.push_back(isotonic_map_to_json(m));
  root["box_coords"] = std::move(coords);
  const auto& f = bank.fingerprint;
  root["fingerprint"] = json{{"num_classes", f.num_classes},
                             {"num_annotators", f.num_annotators},
                             {"num_pairs", f.num_pairs},
                             {"min_iou", f.min_iou},
                             {"gamma", f.gamma},
                             {"var_floor", f.var_floor},
                             {"identity_classes", f.identity_classes}};
  return root;
}

inline CalibratorBank bank_from_json(const json& root)
{
  return detail::with_context("calibrator bank", [&] {
    CalibratorBank bank;
    std::size_t expect = 1;
    for (const auto& jc : root.at("classes"))
    {
      if (jc.at("class_id").get<std::size_t>() != expect++) throw Error("calibrator bank classes out of order");
      bank.class_maps.push_back(isotonic_map_from_json(jc));
    }
    const auto& coords = root.at("box_coords");
    if (coords.size() != 4) throw Error("calibrator bank needs exactly 4 box_coords maps");
    for (std::size_t i = 0; i < 4; ++i) bank.var_maps[i] = isotonic_map_from_json(coords.at(i));
    const auto& f = root.at("fingerprint");
    bank.fingerprint.num_classes = f.at("num_classes").get<int>();
    bank.fingerprint.num_annotators = f.at("num_annotators").get<int>();
    bank.fingerprint.num_pairs = f.at("num_pairs").get<std::size_t>();
    bank.fingerprint.min_iou = f.at("min_iou").get<double>();
    bank.fingerprint.gamma = f.at("gamma").get<double>();
    bank.fingerprint.var_floor = f.at("var_floor").get<double>();
    bank.fingerprint.identity_classes = f.at("identity_classes").get<std::vector<int>>();
    if (bank.fingerprint.num_classes != bank.num_classes())
      throw Error("calibrator bank fingerprint disagrees with its class maps");
    return bank;
  });
}

// ---------------------------------------------------------------------------
// Simulation

inline json simulation_config_to_json(const SimulationConfig& c)
{
  json j;
  j["seed"] = c.seed;
  j["num_images"] = c.num_images;
  j["num_classes"] = c.num_classes;
  j["image_width"] = c.image_width;
  j["image_height"] = c.image_height;
  j["min_objects"] = c.min_objects;
  j["max_objects"] = c.max_objects;
  j["min_size"] = c.min_size;
  j["max_size"] = c.max_size;
  j["separated"] = c.separated;
  json ann = json::array();
  for (const auto& a : c.annotators)
    ann.push_back(json{{"class_accuracy", a.class_accuracy},
                       {"miss_rate", a.miss_rate},
                       {"box_jitter_sigma", a.box_jitter_sigma},
                       {"spurious_rate", a.spurious_rate}});
  j["annotators"] = std::move(ann);
  return j;
}

inline SimulationConfig simulation_config_from_json(const json& j)
{
  return detail::with_context("simulation config", [&] {
    SimulationConfig c;
    c.seed = j.value("seed", c.seed);
    c.num_images = j.value("num_images", c.num_images);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.image_width = j.value("image_width", c.image_width);
    c.image_height = j.value("image_height", c.image_height);
    c.min_objects = j.value("min_objects", c.min_objects);
    c.max_objects = j.value("max_objects", c.max_objects);
    c.min_size = j.value("min_size", c.min_size);
    c.max_size = j.value("max_size", c.max_size);
    c.separated = j.value("separated", c.separated);
    for (const auto& ja : j.at("annotators"))
    {
      AnnotatorProfile a;
      a.class_accuracy = ja.value("class_accuracy", a.class_accuracy);
      a.miss_rate = ja.value("miss_rate", a.miss_rate);
      a.box_jitter_sigma = ja.value("box_jitter_sigma", a.box_jitter_sigma);
      a.spurious_rate = ja.value("spurious_rate", a.spurious_rate);
      c.annotators.push_back(a);
    }
    c.validate();
    return c;
  });
}

inline json latent_to_json(std::span<const LatentImage> latent)
{
  json images = json::array();
  for (const auto& li : latent)
  {
    json objs = json::array();
    for (const auto& o : li.objects)
      objs.push_back(json{{"box", detail::box_json(o.box)}, {"class_id", o.class_id}});
    images.push_back(json{{"image_id", li.image_id}, {"objects", std::move(objs)}});
  }
  json root;
  root["images"] = std::move(images);
  return root;
}

} // namespace annocal

#endif
