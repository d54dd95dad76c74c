#pragma once

#include <stdexcept>
#include <string>

namespace factorkit {

// Stable error codes; names match the diagnostics vocabulary emitted in CSVs.
enum class Errc {
    malformed_row,
    duplicate_key,
    riskfree_gap,
    empty_input,
    empty_window,
    no_fundamentals,
    rank_deficient,
    dimension_mismatch,
    too_few_obs,
    zero_market_variance,
    weight_sum,
    too_few_securities,
    window_out_of_span,
    empty_series,
    missing_variant,
    degenerate_breakpoints,
    empty_cell_month,
    empty_universe,
    empty_snapshot,
    missing_cell,
    insufficient_overlap,
    invalid_config,
    io_error,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_row: return "MALFORMED_ROW";
        case Errc::duplicate_key: return "DUPLICATE_KEY";
        case Errc::riskfree_gap: return "RISKFREE_GAP";
        case Errc::empty_input: return "EMPTY_INPUT";
        case Errc::empty_window: return "EMPTY_WINDOW";
        case Errc::no_fundamentals: return "NO_FUNDAMENTALS";
        case Errc::rank_deficient: return "RANK_DEFICIENT";
        case Errc::dimension_mismatch: return "DIMENSION_MISMATCH";
        case Errc::too_few_obs: return "TOO_FEW_OBS";
        case Errc::zero_market_variance: return "ZERO_MARKET_VARIANCE";
        case Errc::weight_sum: return "WEIGHT_SUM";
        case Errc::too_few_securities: return "TOO_FEW_SECURITIES";
        case Errc::window_out_of_span: return "WINDOW_OUT_OF_SPAN";
        case Errc::empty_series: return "EMPTY_SERIES";
        case Errc::missing_variant: return "MISSING_VARIANT";
        case Errc::degenerate_breakpoints: return "DEGENERATE_BREAKPOINTS";
        case Errc::empty_cell_month: return "EMPTY_CELL_MONTH";
        case Errc::empty_universe: return "EMPTY_UNIVERSE";
        case Errc::empty_snapshot: return "EMPTY_SNAPSHOT";
        case Errc::missing_cell: return "MISSING_CELL";
        case Errc::insufficient_overlap: return "INSUFFICIENT_OVERLAP";
        case Errc::invalid_config: return "INVALID_CONFIG";
        case Errc::io_error: return "IO_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace factorkit
