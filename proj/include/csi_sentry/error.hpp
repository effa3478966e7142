#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csi_sentry {

// Every failure the library reports carries one of these codes.
enum class Errc {
  // wire
  Truncated,
  LengthMismatch,
  BadDims,
  IndexOutOfRange,
  // transport
  BindFailure,
  ConnectFailure,
  ConnectionLost,
  Closed,
  // dsp
  InvalidScale,
  ZeroPower,
  BadWindow,
  // store
  OutOfOrder,
  BadRange,
  IoFailure,
  // synth
  EventOutOfRange,
  BadConfig,
  // anomaly
  TooShort,
  TooFewSegments,
  TooFew,
  BadFormat,
  // classify
  UnknownLabel,
  MalformedLine,
  InconsistentF,
  EmptyDataset,
  DimMismatch,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::Truncated: return "Truncated";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadDims: return "BadDims";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::BindFailure: return "BindFailure";
    case Errc::ConnectFailure: return "ConnectFailure";
    case Errc::ConnectionLost: return "ConnectionLost";
    case Errc::Closed: return "Closed";
    case Errc::InvalidScale: return "InvalidScale";
    case Errc::ZeroPower: return "ZeroPower";
    case Errc::BadWindow: return "BadWindow";
    case Errc::OutOfOrder: return "OutOfOrder";
    case Errc::BadRange: return "BadRange";
    case Errc::IoFailure: return "IoFailure";
    case Errc::EventOutOfRange: return "EventOutOfRange";
    case Errc::BadConfig: return "BadConfig";
    case Errc::TooShort: return "TooShort";
    case Errc::TooFewSegments: return "TooFewSegments";
    case Errc::TooFew: return "TooFew";
    case Errc::BadFormat: return "BadFormat";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::InconsistentF: return "InconsistentF";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DimMismatch: return "DimMismatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace csi_sentry
