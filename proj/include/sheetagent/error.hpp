#pragma once

#include <stdexcept>
#include <string>

namespace sheetagent {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class MalformedRef : public Error
{
public:
    using Error::Error;
};

class NotAZip : public Error
{
public:
    using Error::Error;
};

class MissingPart : public Error
{
public:
    explicit MissingPart(std::string part)
        : Error("missing workbook part: " + part), part_(std::move(part))
    {}

    const std::string& part() const noexcept { return part_; }

private:
    std::string part_;
};

class MalformedXml : public Error
{
public:
    MalformedXml(std::string part, const std::string& detail)
        : Error("malformed XML in " + part + ": " + detail), part_(std::move(part))
    {}

    const std::string& part() const noexcept { return part_; }

private:
    std::string part_;
};

class IoError : public Error
{
public:
    using Error::Error;
};

class UnknownSheet : public Error
{
public:
    explicit UnknownSheet(std::string sheet)
        : Error("unknown sheet: '" + sheet + "'"), sheet_(std::move(sheet))
    {}

    const std::string& sheet() const noexcept { return sheet_; }

private:
    std::string sheet_;
};

class RangeOutOfBounds : public Error
{
public:
    using Error::Error;
};

class RangeTooLarge : public Error
{
public:
    using Error::Error;
};

} // namespace sheetagent
