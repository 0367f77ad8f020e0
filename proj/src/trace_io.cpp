#include "fednest/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fednest/errors.hpp"
#include "json.hpp"

namespace fednest {
namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json row_metrics(const TraceRow& r) {
    return json{{"epoch", r.epoch},
                {"rounds", r.rounds},
                {"samples",
                 json{{"xi", r.samples.xi},
                      {"zeta_grad", r.samples.zeta_grad},
                      {"zeta_hess", r.samples.zeta_hess},
                      {"zeta_jac", r.samples.zeta_jac}}},
                {"grad_norm_sq", r.grad_norm_sq},
                {"x_err_sq", r.x_err_sq},
                {"y_err_sq", r.y_err_sq},
                {"inner_err_sq", r.inner_err_sq},
                {"f_value", r.f_value}};
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write \"" + path + "\"");
    out << content;
    out.flush();
    if (!out) throw ValidationError("write failed for \"" + path + "\"");
}

}  // namespace

const char kTraceCsvHeader[] =
    "epoch,rounds,samples_xi,samples_zeta_grad,samples_zeta_hess,samples_zeta_jac,"
    "grad_norm_sq,x_err_sq,y_err_sq,inner_err_sq,f_value";

std::string trace_to_csv(const RunTrace& trace) {
    std::ostringstream out;
    out << kTraceCsvHeader << '\n';
    for (const TraceRow& r : trace.rows) {
        out << r.epoch << ',' << r.rounds << ',' << r.samples.xi << ',' << r.samples.zeta_grad
            << ',' << r.samples.zeta_hess << ',' << r.samples.zeta_jac << ','
            << fmt(r.grad_norm_sq) << ',' << fmt(r.x_err_sq) << ',' << fmt(r.y_err_sq) << ','
            << fmt(r.inner_err_sq) << ',' << fmt(r.f_value) << '\n';
    }
    return out.str();
}

std::string summary_to_json_text(const RunTrace& trace, const RunConfig& cfg) {
    json doc;
    doc["config"] = json::parse(config_to_text(cfg));
    doc["variant"] = to_string(trace.variant);
    doc["seed"] = trace.seed;
    doc["rows"] = trace.rows.size();
    if (!trace.rows.empty()) doc["final"] = row_metrics(trace.rows.back());
    const RoundLedger& led = trace.ledger;
    doc["ledger"] = json{{"epochs", led.epochs()},
                         {"rounds", led.rounds()},
                         {"rounds_actual", led.rounds_actual()},
                         {"exchanges", led.exchanges()},
                         {"samples",
                          json{{"xi", led.samples().xi},
                               {"zeta_grad", led.samples().zeta_grad},
                               {"zeta_hess", led.samples().zeta_hess},
                               {"zeta_jac", led.samples().zeta_jac}}}};
    return doc.dump(2) + "\n";
}

void write_trace(const RunTrace& trace, const RunConfig& cfg, const std::string& csv_path,
                 const std::string& json_path) {
    if (!csv_path.empty()) write_file(csv_path, trace_to_csv(trace));
    if (!json_path.empty()) write_file(json_path, summary_to_json_text(trace, cfg));
}

}  // namespace fednest
