#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "crashnet/demo.hpp"
#include "crashnet/detection.hpp"
#include "crashnet/trace.hpp"
#include "crashnet/wire.hpp"

namespace py = pybind11;
using namespace crashnet;

namespace {

py::dict event_dict(const DetectedEvent& e) {
  py::dict d;
  d["kind"] = to_string(e.kind);
  d["t"] = e.t;
  d["driver_id"] = e.driver_id;
  d["lat"] = e.fix.lat;
  d["lon"] = e.fix.lon;
  d["fix_t"] = e.fix.t;
  d["speed_kmh"] = e.speed_kmh;
  d["stale_fix"] = e.stale_fix;
  if (e.crash) {
    d["max_axis"] = to_string(e.crash->max_axis);
    d["g_force"] = e.crash->g_force;
    d["magnitude_pct"] = e.crash->magnitude_pct;
    d["collision"] = to_string(e.crash->collision);
  } else if (e.pothole) {
    d["max_axis"] = "z";
    d["g_force"] = e.pothole->g_force;
    d["magnitude_pct"] = e.pothole->magnitude_pct;
  }
  return d;
}

py::dict report_dict(const wire::EventReport& r) {
  py::dict d;
  d["v"] = r.v;
  d["seq"] = r.seq;
  d["driver_id"] = r.driver_id;
  d["type"] = to_string(r.type);
  d["t"] = r.t;
  d["lat"] = r.lat;
  d["lon"] = r.lon;
  d["speed_kmh"] = r.speed_kmh;
  d["max_axis"] = to_string(r.max_axis);
  d["g_force"] = r.g_force;
  d["magnitude_pct"] = r.magnitude_pct;
  d["collision"] = r.collision ? py::object(py::str(to_string(*r.collision))) : py::none();
  return d;
}

template <typename T>
T need(const py::dict& d, const char* key) {
  if (!d.contains(key)) throw py::key_error(key);
  return d[key].cast<T>();
}

wire::EventReport report_from(const py::dict& d) {
  wire::EventReport r;
  if (d.contains("v")) r.v = d["v"].cast<int>();
  r.seq = need<std::uint64_t>(d, "seq");
  r.driver_id = need<std::string>(d, "driver_id");
  const auto type = parse_event_kind(need<std::string>(d, "type"));
  if (!type) throw py::value_error("type");
  r.type = *type;
  r.t = need<std::int64_t>(d, "t");
  r.lat = need<double>(d, "lat");
  r.lon = need<double>(d, "lon");
  r.speed_kmh = need<double>(d, "speed_kmh");
  const auto axis = parse_axis(need<std::string>(d, "max_axis"));
  if (!axis) throw py::value_error("max_axis");
  r.max_axis = *axis;
  r.g_force = need<double>(d, "g_force");
  r.magnitude_pct = need<double>(d, "magnitude_pct");
  if (d.contains("collision") && !d["collision"].is_none()) {
    const auto c = parse_collision(d["collision"].cast<std::string>());
    if (!c) throw py::value_error("collision");
    r.collision = *c;
  }
  return r;
}

DetectionConfig config_from(const py::kwargs& kw) {
  DetectionConfig cfg;
  for (const auto& [k, v] : kw) {
    const auto key = k.cast<std::string>();
    if (key == "gravity_mps2") cfg.gravity_mps2 = v.cast<double>();
    else if (key == "crash_g") cfg.crash_g = v.cast<double>();
    else if (key == "pothole_g_min") cfg.pothole_g_min = v.cast<double>();
    else if (key == "pothole_max_duration_ms") cfg.pothole_max_duration_ms = v.cast<std::int64_t>();
    else if (key == "debounce_ms") cfg.debounce_ms = v.cast<std::int64_t>();
    else if (key == "full_scale_g") cfg.full_scale_g = v.cast<double>();
    else throw py::type_error("unknown detection setting: " + key);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_crashnet, m) {
  m.doc() = "Crash and pothole detection, wire codec and demo pipeline.";

  static py::exception<wire::ValidationError> wire_error(m, "WireError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const wire::ValidationError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(wire_error.ptr())(e.what());
      exc.attr("field") = e.field();
      PyErr_SetObject(wire_error.ptr(), exc.ptr());
    } catch (const wire::ParseError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(wire_error.ptr())(e.what());
      exc.attr("field") = "frame";
      PyErr_SetObject(wire_error.ptr(), exc.ptr());
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const InvalidSampleError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const SpecError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const TraceError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "to_g_force",
      [](double ax, double ay, double az, double gravity) {
        const auto g = to_g_force({0, ax, ay, az}, DetectionConfig{.gravity_mps2 = gravity});
        return py::make_tuple(g.gx, g.gy, g.gz);
      },
      py::arg("ax"), py::arg("ay"), py::arg("az"), py::arg("gravity_mps2") = 9.80665);

  m.def(
      "classify_collision",
      [](double gx, double gy, double gz) { return std::string(to_string(classify_collision({gx, gy, gz}))); },
      py::arg("gx"), py::arg("gy"), py::arg("gz"),
      "Collision class of a peak g vector.");

  m.def(
      "detect",
      [](const std::vector<std::tuple<std::int64_t, double, double, double>>& samples,
         const std::vector<std::tuple<std::int64_t, double, double, double>>& fixes,
         const std::string& driver_id, const py::kwargs& kw) {
        std::vector<AccelSample> s;
        s.reserve(samples.size());
        for (const auto& [t, ax, ay, az] : samples) s.push_back({t, ax, ay, az});
        std::vector<GpsFix> f;
        for (const auto& [t, lat, lon, v] : fixes) f.push_back({t, lat, lon, v});
        const auto cfg = config_from(kw);
        std::vector<DetectedEvent> evs;
        {
          py::gil_scoped_release release;
          evs = run_detector(s, f, driver_id, cfg);
        }
        py::list out;
        for (const auto& e : evs) out.append(event_dict(e));
        return out;
      },
      py::arg("samples"), py::arg("fixes"), py::arg("driver_id") = "driver",
      "Run the detector over (t, ax, ay, az) samples and (t, lat, lon, speed_kmh) fixes.");

  m.def(
      "encode_report", [](const py::dict& d) { return wire::encode_report(report_from(d)); },
      py::arg("report"));
  m.def(
      "decode_report", [](const std::string& frame) { return report_dict(wire::decode_report(frame)); },
      py::arg("frame"));

  m.def(
      "generate_trace",
      [](const std::string& spec_json) { return trace_to_string(generate_trace(parse_scenario(spec_json))); },
      py::arg("spec_json"), "Synthetic trace text from a scenario spec (JSON).");

  m.def(
      "parse_trace",
      [](const std::string& text) {
        std::istringstream in(text);
        const auto tr = parse_trace(in);
        py::list samples, fixes;
        for (const auto& s : tr.samples()) samples.append(py::make_tuple(s.t, s.ax, s.ay, s.az));
        for (const auto& f : tr.fixes()) fixes.append(py::make_tuple(f.t, f.lat, f.lon, f.speed_kmh));
        return py::make_tuple(tr.device_id, samples, fixes);
      },
      py::arg("text"), "Returns (device_id, samples, fixes).");

  m.def(
      "run_demo",
      [](std::uint64_t seed, bool crash) {
        DemoResult r;
        {
          py::gil_scoped_release release;
          r = run_demo({.seed = seed, .crash = crash, .workdir = {}});
        }
        py::dict d;
        d["detected"] = r.run.detected;
        d["acked"] = r.run.acked;
        py::list events;
        for (const auto& e : r.events) events.append(report_dict(e.report));
        d["events"] = events;
        py::list outbox;
        for (const auto& n : r.outbox) {
          py::dict o;
          o["event_id"] = n.event_id;
          o["kind"] = to_string(n.kind);
          o["to"] = n.to;
          o["status"] = to_string(n.status);
          o["attempts"] = n.attempts;
          o["message"] = n.message;
          outbox.append(o);
        }
        d["outbox"] = outbox;
        d["latency_ms"] = r.detection_to_outbox_ms ? py::object(py::float_(*r.detection_to_outbox_ms))
                                                   : py::none();
        std::ostringstream text;
        print_demo(r, text);
        d["summary"] = text.str();
        return d;
      },
      py::arg("seed") = 7, py::arg("crash") = true, "Run the scripted end-to-end demo in a temp dir.");
}
