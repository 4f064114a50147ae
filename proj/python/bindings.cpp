#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evtrojan/codec.hpp"
#include "evtrojan/error.hpp"
#include "evtrojan/evaluation.hpp"
#include "evtrojan/io.hpp"
#include "evtrojan/training.hpp"
#include "evtrojan/triggers.hpp"

namespace py = pybind11;
using namespace evtrojan;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

EventStream stream_from_arrays(const py::array_t<int, py::array::forcecast>& x,
                               const py::array_t<int, py::array::forcecast>& y, const DoubleArray& t,
                               const DoubleArray& p, int width, int height, bool normalized) {
  const auto n = static_cast<std::size_t>(x.size());
  if (static_cast<std::size_t>(y.size()) != n || static_cast<std::size_t>(t.size()) != n ||
      static_cast<std::size_t>(p.size()) != n)
    throw Error(Errc::length_mismatch, "x, y, t and p must have equal length");
  EventStream s;
  s.geometry = {width, height};
  s.time_domain = normalized ? TimeDomain::normalized_unit : TimeDomain::raw_microseconds;
  s.events.resize(n);
  auto xs = x.unchecked<1>();
  auto ys = y.unchecked<1>();
  auto ts = t.unchecked<1>();
  auto ps = p.unchecked<1>();
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<py::ssize_t>(i);
    if (xs(k) < 0 || ys(k) < 0 || xs(k) > 0xFFFF || ys(k) > 0xFFFF)
      throw Error(Errc::coordinate_out_of_range, "coordinate out of range at " + std::to_string(i));
    s.events[i] = {static_cast<std::uint16_t>(xs(k)), static_cast<std::uint16_t>(ys(k)), ts(k), ps(k)};
  }
  return s;
}

template <class Get>
py::array column(const EventStream& s, Get get) {
  using T = decltype(get(Event{}));
  py::array_t<T> out(static_cast<py::ssize_t>(s.size()));
  auto w = out.template mutable_unchecked<1>();
  for (std::size_t i = 0; i < s.size(); ++i) w(static_cast<py::ssize_t>(i)) = get(s.events[i]);
  return out;
}

py::array to_numpy(const RepresentationTensor& r) {
  py::array_t<double> out({r.channels, r.height, r.width});
  std::copy(r.data.begin(), r.data.end(), out.mutable_data());
  return out;
}

RepresentationTensor from_numpy(const DoubleArray& a) {
  if (a.ndim() != 3) throw Error(Errc::shape_mismatch, "expected a (C, H, W) array");
  RepresentationTensor r(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                         static_cast<int>(a.shape(2)), Method::est);
  std::copy(a.data(), a.data() + a.size(), r.data.begin());
  return r;
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::config_invalid, e.what());
  }
}

std::vector<LabeledStream> labeled(const std::vector<std::pair<EventStream, int>>& samples) {
  std::vector<LabeledStream> out;
  out.reserve(samples.size());
  for (const auto& [s, l] : samples) out.push_back({s, l});
  return out;
}

std::vector<std::pair<EventStream, int>> unlabeled(const std::vector<LabeledStream>& samples) {
  std::vector<std::pair<EventStream, int>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.emplace_back(s.stream, s.label);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-stream backdoor toolkit (native core)";

  py::register_exception<Error>(m, "EvtrojanError", PyExc_ValueError);

  py::class_<EventStream>(m, "EventStream")
      .def(py::init(&stream_from_arrays), py::arg("x"), py::arg("y"), py::arg("t"), py::arg("p"),
           py::arg("width"), py::arg("height"), py::arg("normalized") = true)
      .def_property_readonly("x", [](const EventStream& s) { return column(s, [](const Event& e) { return int(e.x); }); })
      .def_property_readonly("y", [](const EventStream& s) { return column(s, [](const Event& e) { return int(e.y); }); })
      .def_property_readonly("t", [](const EventStream& s) { return column(s, [](const Event& e) { return e.t; }); })
      .def_property_readonly("p", [](const EventStream& s) { return column(s, [](const Event& e) { return e.p; }); })
      .def_property_readonly("width", [](const EventStream& s) { return s.geometry.width; })
      .def_property_readonly("height", [](const EventStream& s) { return s.geometry.height; })
      .def_property_readonly("normalized",
                             [](const EventStream& s) { return s.time_domain == TimeDomain::normalized_unit; })
      .def("__len__", &EventStream::size)
      .def("__eq__", [](const EventStream& a, const EventStream& b) { return a == b; })
      .def("validate", [](const EventStream& s) {
        std::vector<std::string> out;
        for (const auto& v : validate(s)) out.push_back(to_string(v));
        return out;
      });

  m.def("parse_bin", [](const py::bytes& b, std::optional<std::pair<int, int>> size) {
        const std::string raw = b;
        std::optional<SensorGeometry> g;
        if (size) g = SensorGeometry{size->first, size->second};
        return parse_bin(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), g);
      }, py::arg("data"), py::arg("size") = py::none());
  m.def("write_bin", [](const EventStream& s) {
    const auto bytes = write_bin(s);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("parse_csv", [](const std::string& text, std::pair<int, int> size) {
        return parse_csv(text, TimeDomain::normalized_unit, SensorGeometry{size.first, size.second});
      }, py::arg("text"), py::arg("size"));
  m.def("write_csv", &write_csv);
  m.def("normalize_time", &normalize_time);

  m.def("make_dataset", [](const std::string& recipe) { return unlabeled(make_dataset(recipe_from_json(parse(recipe)))); },
        py::arg("recipe_json"));

  m.def("represent", [](const EventStream& s, const std::string& cfg) {
        return to_numpy(represent(s, repr_from_json(parse(cfg))));
      }, py::arg("stream"), py::arg("config_json"));

  m.def("make_immutable_trigger", [](const std::string& spec, int width, int height) {
        return make_immutable_trigger(trigger_spec_from_json(parse(spec)), {width, height});
      }, py::arg("spec_json"), py::arg("width"), py::arg("height"));
  m.def("inject", &inject, py::arg("stream"), py::arg("trigger"));
  m.def("trigger_loss", [](const std::vector<double>& g, const std::vector<double>& o, double l1, double l2) {
        const TriggerLoss l = trigger_loss(g, o, {l1, l2});
        return py::make_tuple(l.value, l.cosine, l.psi, l.grad);
      }, py::arg("generated"), py::arg("original"), py::arg("lambda1") = 1.0, py::arg("lambda2") = 2.0);

  m.def("stc_filter", [](const EventStream& s, int radius, double window) {
        StcConfig cfg;
        cfg.radius = radius;
        cfg.window = window;
        return stc_filter(s, cfg);
      }, py::arg("stream"), py::arg("radius") = 1, py::arg("window") = 0.05);
  m.def("psnr", [](const DoubleArray& a, const DoubleArray& b) { return psnr(from_numpy(a), from_numpy(b)); });
  m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) { return ssim(from_numpy(a), from_numpy(b)); });

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("model", [](const TrainResult& r) {
        const auto b = encode_model(r.model);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_property_readonly("generator", [](const TrainResult& r) -> py::object {
        if (!r.generator) return py::none();
        const auto b = encode_generator(*r.generator);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_property_readonly("history", [](const TrainResult& r) {
        std::vector<std::string> out;
        for (const auto& h : r.history) out.push_back(to_json(h).dump());
        return out;
      });

  m.def("train_backdoor", [](const std::vector<std::pair<EventStream, int>>& train, const std::string& cfg) {
        const auto data = labeled(train);
        const TrainConfig c = train_config_from_json(parse(cfg));
        py::gil_scoped_release release;
        return train_backdoor(data, c);
      }, py::arg("samples"), py::arg("config_json"));

  m.def("poison_all", [](const std::vector<std::pair<EventStream, int>>& samples, const std::string& policy,
                         std::optional<py::bytes> generator) {
        std::optional<GeneratorParams> g;
        if (generator) {
          const std::string raw = *generator;
          g = decode_generator(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
        }
        return unlabeled(poison_all(labeled(samples), poison_from_json(parse(policy)), g ? &*g : nullptr));
      }, py::arg("samples"), py::arg("policy_json"), py::arg("generator") = py::none());

  m.def("evaluate", [](const py::bytes& model, const std::string& repr,
                       const std::vector<std::pair<EventStream, int>>& clean,
                       const std::vector<std::pair<EventStream, int>>& triggered, int target) {
        const std::string raw = model;
        const nn::ModelParams p =
            decode_model(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
        const ReprConfig r = repr_from_json(parse(repr));
        py::dict out;
        out["cda"] = cda(p, r, labeled(clean)).rate;
        out["asr"] = triggered.empty() ? py::object(py::none()) : py::object(py::float_(asr(p, r, labeled(triggered), target).rate));
        return out;
      }, py::arg("model"), py::arg("repr_json"), py::arg("clean"), py::arg("triggered"), py::arg("target"));
}
