#pragma once

#include <stdexcept>
#include <string>

namespace preictal {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and map it to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {      // malformed EDF / annotation input
public:
    using Error::Error;
};
class ConfigError : public Error {     // invalid configuration value
public:
    using Error::Error;
};
class DesignError : public Error {     // filter design produced an unusable result
public:
    using Error::Error;
};
class LengthError : public Error {     // signal too short for the requested operation
public:
    using Error::Error;
};
class MontageError : public Error {    // montage references electrodes not in the recording
public:
    using Error::Error;
};
class ShapeError : public Error {      // tensor shape mismatch
public:
    using Error::Error;
};
class BatchError : public Error {      // batch too small for batch statistics
public:
    using Error::Error;
};
class DataError : public Error {       // dataset does not satisfy an operation's needs
public:
    using Error::Error;
};
class UsageError : public Error {      // API misuse (e.g. backward() twice)
public:
    using Error::Error;
};
class FormatError : public Error {     // corrupt binary artifact
public:
    using Error::Error;
};
class VersionError : public Error {    // artifact version / shape table mismatch
public:
    using Error::Error;
};
class NonFiniteError : public Error {  // NaN/Inf surfaced in a computation
public:
    using Error::Error;
};
class IoError : public Error {         // filesystem failure
public:
    using Error::Error;
};

}  // namespace preictal
