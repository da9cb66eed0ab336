#include "pcaddreach/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

namespace pcaddreach::io {

namespace {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("failed to format a double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error("malformed number in CSV: " + std::string(text));
  return value;
}

std::size_t parse_index(std::string_view text) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error("malformed index in CSV: " + std::string(text));
  return value;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = data;
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
    throw std::runtime_error("matrix payload size does not match its dims");
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[at++];
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void check_version(const json& j, const std::string& what) {
  if (!j.contains("format_version"))
    throw std::runtime_error(what + ": missing format_version");
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error(what + ": unsupported format_version " +
                             j.at("format_version").dump());
}

json calibration_to_json(const CalibrationMeta& meta) {
  json j;
  j["samples"] = meta.sample_count;
  j["delta"] = meta.delta;
  j["tau"] = meta.tau;
  j["rank"] = meta.rank;
  j["quantile"] = meta.quantile;
  return j;
}

CalibrationMeta calibration_from_json(const json& j) {
  CalibrationMeta meta;
  meta.sample_count = j.at("samples").get<std::size_t>();
  meta.delta = j.at("delta").get<double>();
  meta.tau = j.at("tau").get<double>();
  meta.rank = j.at("rank").get<std::size_t>();
  meta.quantile = j.at("quantile").get<double>();
  return meta;
}

}  // namespace

CalibrationMeta to_meta(const CalibrationResult& result) {
  CalibrationMeta meta;
  meta.sample_count = result.sample_count;
  meta.delta = result.delta;
  meta.tau = result.tau;
  meta.rank = result.rank;
  meta.quantile = result.quantile;
  return meta;
}

json star_to_json(const StarSetd& star) {
  json j;
  j["center"] = vector_to_json(star.center);
  j["basis"] = matrix_to_json(star.basis);
  j["A"] = matrix_to_json(star.constraint_matrix);
  j["b"] = vector_to_json(star.constraint_rhs);
  return j;
}

StarSetd star_from_json(const json& j) {
  StarSetd star;
  star.center = vector_from_json(j.at("center"));
  star.basis = matrix_from_json(j.at("basis"));
  star.constraint_matrix = matrix_from_json(j.at("A"));
  star.constraint_rhs = vector_from_json(j.at("b"));
  if (star.basis.rows() != star.center.size() ||
      star.constraint_matrix.cols() != star.basis.cols() ||
      star.constraint_rhs.size() != star.constraint_matrix.rows())
    throw std::runtime_error("star payload has inconsistent dims");
  return star;
}

json plan_to_json(const SegmentPlan& plan) {
  json j;
  j["horizon"] = plan.horizon;
  j["lengths"] = plan.lengths;
  j["first_active"] = plan.first_active;
  return j;
}

SegmentPlan plan_from_json(const json& j) {
  auto lengths = j.at("lengths").get<std::vector<std::size_t>>();
  SegmentPlan plan = make_plan(j.at("horizon").get<std::size_t>(), std::move(lengths));
  plan.first_active = j.at("first_active").get<std::size_t>();
  if (plan.first_active >= plan.num_segments())
    throw std::runtime_error("segment plan payload: first_active out of range");
  return plan;
}

json system_to_json(const SystemSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["state_dim"] = spec.state_dim;
  j["params"] = spec.params;
  j["noise_cov"] = matrix_to_json(spec.noise_cov);
  j["initial_box"] = {{"lower", vector_to_json(spec.initial_box.lower)},
                      {"upper", vector_to_json(spec.initial_box.upper)}};
  return j;
}

SystemSpec system_from_json(const json& j) {
  SystemSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.state_dim = j.at("state_dim").get<Eigen::Index>();
  spec.params = j.at("params").get<std::map<std::string, double>>();
  spec.noise_cov = matrix_from_json(j.at("noise_cov"));
  spec.initial_box.lower = vector_from_json(j.at("initial_box").at("lower"));
  spec.initial_box.upper = vector_from_json(j.at("initial_box").at("upper"));
  return spec;
}

json model_to_json(const Mlpd& net) {
  json j;
  j["format_version"] = kFormatVersion;
  j["layer_widths"] = net.layer_widths;
  json weights = json::array(), biases = json::array();
  for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
  for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["input_scaling"] = {{"scale", vector_to_json(net.input_scaling.scale)},
                        {"offset", vector_to_json(net.input_scaling.offset)}};
  j["output_scaling"] = {{"scale", vector_to_json(net.output_scaling.scale)},
                         {"offset", vector_to_json(net.output_scaling.offset)}};
  return j;
}

Mlpd model_from_json(const json& j) {
  check_version(j, "model");
  Mlpd net;
  net.layer_widths = j.at("layer_widths").get<std::vector<Eigen::Index>>();
  if (net.layer_widths.size() < 2) throw std::runtime_error("model: fewer than two layers");
  for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(vector_from_json(b));
  if (net.weights.size() != net.layer_widths.size() - 1 ||
      net.biases.size() != net.weights.size())
    throw std::runtime_error("model: layer count mismatch");
  for (std::size_t l = 0; l < net.weights.size(); ++l)
    if (net.weights[l].rows() != net.layer_widths[l + 1] ||
        net.weights[l].cols() != net.layer_widths[l] ||
        net.biases[l].size() != net.layer_widths[l + 1])
      throw std::runtime_error("model: weight dims do not match layer_widths");
  net.input_scaling.scale = vector_from_json(j.at("input_scaling").at("scale"));
  net.input_scaling.offset = vector_from_json(j.at("input_scaling").at("offset"));
  net.output_scaling.scale = vector_from_json(j.at("output_scaling").at("scale"));
  net.output_scaling.offset = vector_from_json(j.at("output_scaling").at("offset"));
  if (net.input_scaling.scale.size() != net.layer_widths.front() ||
      net.output_scaling.scale.size() != net.layer_widths.back())
    throw std::runtime_error("model: scaling dims do not match layer_widths");
  return net;
}

void save_model(const Mlpd& net, const std::string& path) { save_json(model_to_json(net), path); }

Mlpd load_model(const std::string& path) { return model_from_json(load_json(path)); }

void save_dataset(const TrajectoryDataset& dataset, const std::string& csv_path,
                  const std::string& meta_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open for writing: " + csv_path);
  const Eigen::Index n = dataset.spec.state_dim;
  csv << "traj_id,k";
  for (Eigen::Index d = 0; d < n; ++d) csv << ",x" << (d + 1);
  csv << "\n";
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& rec = dataset.records[i];
    csv << i << ",0";
    for (Eigen::Index d = 0; d < n; ++d) csv << "," << format_double(rec.initial_state(d));
    csv << "\n";
    for (Eigen::Index k = 0; k < rec.states.cols(); ++k) {
      csv << i << "," << (k + 1);
      for (Eigen::Index d = 0; d < n; ++d) csv << "," << format_double(rec.states(d, k));
      csv << "\n";
    }
  }
  if (!csv) throw std::runtime_error("write failed: " + csv_path);

  json meta;
  meta["format_version"] = kFormatVersion;
  meta["system"] = system_to_json(dataset.spec);
  meta["seed"] = dataset.seed;
  meta["role"] = to_string(dataset.role);
  meta["count"] = dataset.records.size();
  meta["horizon"] = dataset.horizon;
  save_json(meta, meta_path);
}

TrajectoryDataset load_dataset(const std::string& csv_path, const std::string& meta_path) {
  json meta = load_json(meta_path);
  check_version(meta, "dataset meta");

  TrajectoryDataset dataset;
  dataset.spec = system_from_json(meta.at("system"));
  dataset.seed = meta.at("seed").get<std::uint64_t>();
  dataset.role = dataset_role_from_string(meta.at("role").get<std::string>());
  dataset.horizon = meta.at("horizon").get<std::size_t>();
  const auto count = meta.at("count").get<std::size_t>();
  const Eigen::Index n = dataset.spec.state_dim;

  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw std::runtime_error("empty dataset CSV: " + csv_path);

  dataset.records.assign(count, Trajectory{Eigen::VectorXd(n),
                                           Eigen::MatrixXd(n, static_cast<Eigen::Index>(
                                                                  dataset.horizon))});
  std::vector<std::size_t> rows_seen(count, 0);
  std::vector<std::string_view> fields;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    fields.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != static_cast<std::size_t>(n) + 2)
      throw std::runtime_error("dataset CSV row has wrong field count: " + csv_path);
    const std::size_t id = parse_index(fields[0]);
    const std::size_t k = parse_index(fields[1]);
    if (id >= count || k > dataset.horizon)
      throw std::runtime_error("dataset CSV row out of range: " + csv_path);
    Trajectory& rec = dataset.records[id];
    for (Eigen::Index d = 0; d < n; ++d) {
      const double value = parse_double(fields[static_cast<std::size_t>(d) + 2]);
      if (k == 0)
        rec.initial_state(d) = value;
      else
        rec.states(d, static_cast<Eigen::Index>(k) - 1) = value;
    }
    rows_seen[id] += 1;
  }
  for (std::size_t i = 0; i < count; ++i)
    if (rows_seen[i] != dataset.horizon + 1)
      throw std::runtime_error("dataset CSV record " + std::to_string(i) +
                               " has missing or duplicate rows");
  return dataset;
}

void save_error_model(const ErrorModel& model, const CalibrationMeta& meta,
                      const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["plan"] = plan_to_json(model.plan);
  j["state_dim"] = model.state_dim;
  json segments = json::array();
  for (std::size_t a = 0; a < model.active_count(); ++a) {
    json seg;
    seg["segment"] = model.plan.first_active + a;
    seg["mean"] = vector_to_json(model.means[a]);
    seg["eigvecs"] = matrix_to_json(model.eigvecs[a]);
    seg["omega"] = vector_to_json(model.omega[a]);
    segments.push_back(std::move(seg));
  }
  j["segments"] = std::move(segments);
  j["calibration"] = calibration_to_json(meta);
  save_json(j, path);
}

std::pair<ErrorModel, CalibrationMeta> load_error_model(const std::string& path) {
  json j = load_json(path);
  check_version(j, "error model");
  ErrorModel model;
  model.plan = plan_from_json(j.at("plan"));
  model.state_dim = j.at("state_dim").get<Eigen::Index>();
  for (const auto& seg : j.at("segments")) {
    model.means.push_back(vector_from_json(seg.at("mean")));
    model.eigvecs.push_back(matrix_from_json(seg.at("eigvecs")));
    model.omega.push_back(vector_from_json(seg.at("omega")));
  }
  if (model.active_count() != model.plan.num_segments() - model.plan.first_active)
    throw std::runtime_error("error model: segment count does not match the plan");
  return {std::move(model), calibration_from_json(j.at("calibration"))};
}

void save_baseline_model(const Eigen::VectorXd& alpha, const SegmentPlan& plan,
                         const CalibrationMeta& meta, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["plan"] = plan_to_json(plan);
  j["alpha"] = vector_to_json(alpha);
  j["calibration"] = calibration_to_json(meta);
  save_json(j, path);
}

std::pair<Eigen::VectorXd, CalibrationMeta> load_baseline_model(const std::string& path) {
  json j = load_json(path);
  check_version(j, "baseline model");
  return {vector_from_json(j.at("alpha")), calibration_from_json(j.at("calibration"))};
}

void save_flowpipe(const Flowpipe& flowpipe, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = to_string(flowpipe.kind);
  j["mode"] = to_string(flowpipe.mode);
  j["state_dim"] = flowpipe.state_dim;
  j["plan"] = plan_to_json(flowpipe.plan);
  json segments = json::array();
  for (std::size_t a = 0; a < flowpipe.active_count(); ++a) {
    const std::size_t q = flowpipe.plan.first_active + a;
    json seg;
    seg["segment"] = q;
    seg["first_step"] = flowpipe.plan.offsets[q] + 1;
    seg["last_step"] = flowpipe.plan.offsets[q] + flowpipe.plan.lengths[q];
    json stars = json::array();
    for (const auto& star : flowpipe.segments[a]) stars.push_back(star_to_json(star));
    seg["stars"] = std::move(stars);
    segments.push_back(std::move(seg));
  }
  j["segments"] = std::move(segments);
  if (flowpipe.kind == FlowpipeKind::Confident) {
    j["delta"] = flowpipe.delta;
    j["tau"] = flowpipe.tau;
    j["rho_star"] = flowpipe.rho_star;
    j["residual"] = flowpipe.residual_kind;
    json cubes = json::array();
    for (const auto& cube : flowpipe.hypercubes) cubes.push_back(star_to_json(cube));
    j["hypercubes"] = std::move(cubes);
  }
  save_json(j, path);
}

Flowpipe load_flowpipe(const std::string& path) {
  json j = load_json(path);
  check_version(j, "flowpipe");
  Flowpipe flowpipe;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "surrogate")
    flowpipe.kind = FlowpipeKind::Surrogate;
  else if (kind == "confident")
    flowpipe.kind = FlowpipeKind::Confident;
  else
    throw std::runtime_error("flowpipe: unknown kind " + kind);
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "exact")
    flowpipe.mode = ReachMode::Exact;
  else if (mode == "approx")
    flowpipe.mode = ReachMode::Approx;
  else
    throw std::runtime_error("flowpipe: unknown mode " + mode);
  flowpipe.state_dim = j.at("state_dim").get<Eigen::Index>();
  flowpipe.plan = plan_from_json(j.at("plan"));
  flowpipe.segments.resize(j.at("segments").size());
  std::size_t a = 0;
  for (const auto& seg : j.at("segments")) {
    for (const auto& star : seg.at("stars")) flowpipe.segments[a].push_back(star_from_json(star));
    ++a;
  }
  if (flowpipe.active_count() != flowpipe.plan.num_segments() - flowpipe.plan.first_active)
    throw std::runtime_error("flowpipe: segment count does not match the plan");
  if (flowpipe.kind == FlowpipeKind::Confident) {
    flowpipe.delta = j.at("delta").get<double>();
    flowpipe.tau = j.at("tau").get<double>();
    flowpipe.rho_star = j.at("rho_star").get<double>();
    flowpipe.residual_kind = j.at("residual").get<std::string>();
    for (const auto& cube : j.at("hypercubes"))
      flowpipe.hypercubes.push_back(star_from_json(cube));
  }
  return flowpipe;
}

json coverage_to_json(const CoverageReport& report) {
  json j;
  j["trials"] = report.trials;
  j["hits"] = report.hits;
  j["coverage"] = report.coverage;
  j["delta"] = report.delta;
  j["segment_violations"] = report.segment_violations;
  j["first_violation"] = report.first_violation;
  return j;
}

void save_bounds_csv(const Flowpipe& flowpipe, const std::string& path) {
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open for writing: " + path);
  csv << "k,dim,lower,upper\n";
  const Eigen::Index n = flowpipe.state_dim;
  for (std::size_t a = 0; a < flowpipe.active_count(); ++a) {
    const std::size_t q = flowpipe.plan.first_active + a;
    std::vector<Boxd> boxes;
    boxes.reserve(flowpipe.segments[a].size());
    for (const auto& star : flowpipe.segments[a]) boxes.push_back(bounds(star));
    for (std::size_t t = 0; t < flowpipe.plan.lengths[q]; ++t) {
      const std::size_t k = flowpipe.plan.offsets[q] + t + 1;
      for (Eigen::Index d = 0; d < n; ++d) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * n + d;
        double lo = boxes.front().lower(row), hi = boxes.front().upper(row);
        for (const auto& box : boxes) {
          lo = std::min(lo, box.lower(row));
          hi = std::max(hi, box.upper(row));
        }
        csv << k << "," << (d + 1) << "," << format_double(lo) << "," << format_double(hi)
            << "\n";
      }
    }
  }
  if (!csv) throw std::runtime_error("write failed: " + path);
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace pcaddreach::io
