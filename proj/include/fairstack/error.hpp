#pragma once

#include <stdexcept>
#include <string>

namespace fairstack {

enum class ErrorKind { Structural, Input, Capacity, Numeric, Contract, Ingestion, Split, Fit, Io };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Structural: return "structural error";
        case ErrorKind::Input: return "input error";
        case ErrorKind::Capacity: return "capacity error";
        case ErrorKind::Numeric: return "numeric error";
        case ErrorKind::Contract: return "contract error";
        case ErrorKind::Ingestion: return "ingestion error";
        case ErrorKind::Split: return "split error";
        case ErrorKind::Fit: return "fit error";
        case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fairstack
