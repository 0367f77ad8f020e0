#pragma once

// Trace serialization: a CSV of per-epoch metrics plus a JSON summary that
// carries the fully resolved config echo (reloadable), the final metrics,
// and the communication/sample ledger totals.

#include <string>

#include "fednest/config.hpp"
#include "fednest/engine.hpp"

namespace fednest {

// The stable CSV schema. Doubles are printed with 17 significant digits so
// the file reproduces the run bit for bit.
extern const char kTraceCsvHeader[];

std::string trace_to_csv(const RunTrace& trace);
std::string summary_to_json_text(const RunTrace& trace, const RunConfig& cfg);

// Write both artifacts; an empty path skips that artifact. Throws
// ValidationError on an unwritable path.
void write_trace(const RunTrace& trace, const RunConfig& cfg, const std::string& csv_path,
                 const std::string& json_path);

}  // namespace fednest
