#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geochart/pipeline.hpp"

namespace py = pybind11;
using namespace geochart;
namespace gp = geochart::pipeline;
using nlohmann::json;

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Array points_to_array(const std::vector<Vec2>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(i, 0) = pts[i].x;
    v(i, 1) = pts[i].y;
  }
  return out;
}

std::vector<Vec2> array_to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw Error("expected an (N, 2) array of points");
  const auto v = a.unchecked<2>();
  std::vector<Vec2> pts(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[i] = {v(i, 0), v(i, 1)};
  return pts;
}

Array matrix_to_array(const graph::DistanceMatrix& d) {
  Array out({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.size())});
  std::copy(d.values().begin(), d.values().end(), out.mutable_data());
  return out;
}

graph::DistanceMatrix array_to_matrix(const Array& a, graph::MatrixKind kind) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw Error("expected a square distance matrix");
  const auto n = static_cast<int>(a.shape(0));
  graph::DistanceMatrix d(n, kind, std::vector<double>(a.data(), a.data() + a.size()));
  d.validate();
  return d;
}

Array tensors_to_array(const std::vector<csi::AlignedTensor>& t) {
  const py::ssize_t rows = t.empty() ? 0 : t[0].rows, cols = t.empty() ? 0 : t[0].cols;
  Array out({static_cast<py::ssize_t>(t.size()), rows, cols});
  double* dst = out.mutable_data();
  for (const auto& x : t) dst = std::copy(x.values.begin(), x.values.end(), dst);
  return out;
}

std::vector<csi::AlignedTensor> array_to_tensors(const Array& a) {
  if (a.ndim() != 3) throw Error("expected an (N, stations, window) array");
  std::vector<csi::AlignedTensor> t(a.shape(0));
  const std::size_t per = static_cast<std::size_t>(a.shape(1)) * a.shape(2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i].rows = static_cast<int>(a.shape(1));
    t[i].cols = static_cast<int>(a.shape(2));
    t[i].values.assign(a.data() + i * per, a.data() + (i + 1) * per);
  }
  return t;
}

csi::AlignedTensor array_to_tensor(const Array& a) {
  if (a.ndim() != 2) throw Error("expected a (stations, window) array");
  csi::AlignedTensor t;
  t.rows = static_cast<int>(a.shape(0));
  t.cols = static_cast<int>(a.shape(1));
  t.values.assign(a.data(), a.data() + a.size());
  return t;
}

gp::PipelineConfig parse_config(const std::string& text) {
  auto cfg = gp::config_from_json(text.empty() ? json::object() : json::parse(text));
  cfg.validate();
  return cfg;
}

gp::Split parse_split(const std::string& s) {
  if (s == "train") return gp::Split::Train;
  if (s == "test") return gp::Split::Test;
  throw Error("unknown split '" + s + "' (train|test)");
}

py::dict simulate(const std::string& config, const std::string& split) {
  const auto cfg = parse_config(config);
  const auto ds = gp::simulate_split(cfg, parse_split(split));
  const auto n = static_cast<py::ssize_t>(ds.snapshots.size());
  const py::ssize_t b = ds.num_stations(), l = n ? ds.snapshots[0].cir_length : 0;
  Array cirs({n, b, l}), toa({n, b}), ts({n});
  double* c = cirs.mutable_data();
  double* t = toa.mutable_data();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& s = ds.snapshots[i];
    c = std::copy(s.cirs.begin(), s.cirs.end(), c);
    t = std::copy(s.measured_toa.begin(), s.measured_toa.end(), t);
    ts.mutable_data()[i] = s.timestamp;
  }
  py::dict out;
  out["positions"] = points_to_array(gp::positions(ds));
  out["cirs"] = cirs;
  out["toa"] = toa;
  out["timestamps"] = ts;
  out["sample_rate"] = ds.radio.sample_rate;
  out["window"] = gp::resolved_window(cfg);
  return out;
}

Array preprocess(const Array& cirs, const Array& toa, double sample_rate, int window, const std::string& norm) {
  if (cirs.ndim() != 3 || toa.ndim() != 2 || toa.shape(0) != cirs.shape(0) || toa.shape(1) != cirs.shape(1))
    throw Error("expected cirs (N, stations, length) and toa (N, stations)");
  std::vector<sim::CirSnapshot> snaps(cirs.shape(0));
  const std::size_t per = static_cast<std::size_t>(cirs.shape(1)) * cirs.shape(2);
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    auto& s = snaps[i];
    s.index = static_cast<std::int64_t>(i);
    s.num_stations = static_cast<int>(cirs.shape(1));
    s.cir_length = static_cast<int>(cirs.shape(2));
    s.cirs.assign(cirs.data() + i * per, cirs.data() + (i + 1) * per);
    s.measured_toa.assign(toa.data() + i * s.num_stations, toa.data() + (i + 1) * s.num_stations);
  }
  return tensors_to_array(csi::preprocess_all(snaps, sample_rate, window, csi::row_norm_from_string(norm)));
}

class Encoder {
public:
  explicit Encoder(chart::TrainResult r) : result_(std::move(r)) {}
  Array embed(const Array& tensors) const {
    return points_to_array(chart::embed_dataset(result_.params, array_to_tensors(tensors)).points);
  }
  std::vector<double> loss_history() const { return result_.loss_history; }
  int epochs_run() const { return result_.epochs_run; }
  std::size_t num_parameters() const { return result_.params.num_parameters(); }

private:
  chart::TrainResult result_;
};

Encoder train_encoder(const Array& tensors, const Array& dgeo, const std::string& train_config) {
  auto cfg = io::train_config_from_json(train_config.empty() ? json::object() : json::parse(train_config));
  cfg.validate();
  py::gil_scoped_release release;
  return Encoder(chart::train(array_to_tensors(tensors), array_to_matrix(dgeo, graph::MatrixKind::Geodesic), cfg));
}

std::string report_list(const std::vector<eval::EvalReport>& reports) {
  json j = json::array();
  for (const auto& r : reports) j.push_back(io::to_json(r));
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Channel charting core";
  m.attr("__version__") = gp::kVersion;
  py::register_exception<Error>(m, "GeochartError", PyExc_ValueError);

  m.def("default_config", [] { return gp::to_json(gp::PipelineConfig{}).dump(); },
        "Default pipeline configuration as a JSON string.");
  m.def("simulate", &simulate, py::arg("config") = "", py::arg("split") = "train");
  m.def("preprocess", &preprocess, py::arg("cirs"), py::arg("toa"), py::arg("sample_rate"), py::arg("window"),
        py::arg("norm") = "none");
  m.def("cir_distance", [](const Array& a, const Array& b) { return csi::cir_distance(array_to_tensor(a), array_to_tensor(b)); });
  m.def("pairwise_distances", [](const Array& t) {
    const auto tensors = array_to_tensors(t);
    graph::DistanceMatrix d;
    {
      py::gil_scoped_release release;
      d = graph::pairwise_matrix(tensors);
    }
    return matrix_to_array(d);
  });
  m.def("euclidean_distances", [](const Array& p) { return matrix_to_array(graph::euclidean_matrix(array_to_points(p))); });
  m.def("geodesic_distances", [](const Array& d, int k) {
    return matrix_to_array(gp::geodesics_checked(array_to_matrix(d, graph::MatrixKind::Pairwise), k));
  });
  m.def("minimal_connecting_k", [](const Array& d) {
    return graph::minimal_connecting_k(array_to_matrix(d, graph::MatrixKind::Pairwise));
  });

  py::class_<Encoder>(m, "Encoder")
      .def("embed", &Encoder::embed)
      .def_property_readonly("loss_history", &Encoder::loss_history)
      .def_property_readonly("epochs_run", &Encoder::epochs_run)
      .def_property_readonly("num_parameters", &Encoder::num_parameters);
  m.def("train_encoder", &train_encoder, py::arg("tensors"), py::arg("geodesic"), py::arg("train_config") = "");

  m.def("pca_embed", [](const Array& t) { return points_to_array(chart::pca_embed(array_to_tensors(t)).points); });
  m.def("mds_embed", [](const Array& d, int max_iterations, std::uint64_t seed) {
    chart::MdsConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.seed = seed;
    return points_to_array(chart::mds_embed(array_to_matrix(d, graph::MatrixKind::Pairwise), cfg).embedding.points);
  }, py::arg("d"), py::arg("max_iterations") = 300, py::arg("seed") = 1);
  m.def("sammon_embed", [](const Array& d, int max_iterations, std::uint64_t seed) {
    chart::SammonConfig cfg;
    cfg.max_iterations = max_iterations;
    cfg.seed = seed;
    return points_to_array(chart::sammon_embed(array_to_matrix(d, graph::MatrixKind::Pairwise), cfg).embedding.points);
  }, py::arg("d"), py::arg("max_iterations") = 300, py::arg("seed") = 1);

  m.def("continuity", [](const Array& orig, const Array& emb, int k) {
    return eval::continuity(array_to_matrix(orig, graph::MatrixKind::Pairwise),
                            array_to_matrix(emb, graph::MatrixKind::Euclidean), k);
  });
  m.def("trustworthiness", [](const Array& orig, const Array& emb, int k) {
    return eval::trustworthiness(array_to_matrix(orig, graph::MatrixKind::Pairwise),
                                 array_to_matrix(emb, graph::MatrixKind::Euclidean), k);
  });
  m.def("fit_affine", [](const Array& chart, const Array& gt) {
    const auto t = eval::fit_affine(array_to_points(chart), array_to_points(gt));
    Array out({py::ssize_t{2}, py::ssize_t{3}});
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) out.mutable_at(r, c) = t.m[r][c];
    return out;
  });
  m.def("position_errors", [](const Array& chart, const Array& transform, const Array& gt) {
    if (transform.ndim() != 2 || transform.shape(0) != 2 || transform.shape(1) != 3)
      throw Error("expected a (2, 3) affine transform");
    eval::AffineTransform t;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) t.m[r][c] = transform.at(r, c);
    const auto e = eval::position_errors(array_to_points(chart), t, array_to_points(gt));
    return py::make_tuple(e.mae, e.ce90);
  });

  m.def("run_pipeline", [](const std::string& config) {
    const auto cfg = parse_config(config);
    py::gil_scoped_release release;
    return report_list(gp::cmd_pipeline(cfg).reports);
  }, py::arg("config"));
  m.def("distance_study", [](const std::string& config, const std::string& out) {
    const auto cfg = parse_config(config);
    gp::StudyResult r;
    {
      py::gil_scoped_release release;
      r = gp::cmd_study(cfg, {}, out);
    }
    return py::make_tuple(r.r_cir, r.r_geo, static_cast<std::int64_t>(r.pairs.size()), r.clamped);
  }, py::arg("config"), py::arg("out"));
}
