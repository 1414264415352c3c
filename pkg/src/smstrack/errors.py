"""Exception types shared across the tracking stack."""


class SmsTrackError(Exception):
    """Base class for all errors raised by this package."""


class InvalidPassword(SmsTrackError):
    pass


class InvalidImei(SmsTrackError):
    pass


class InvalidPhoneNumber(SmsTrackError):
    pass


class DuplicateImei(SmsTrackError):
    pass


class DuplicatePhoneNumber(SmsTrackError):
    pass


class UnknownDevice(SmsTrackError):
    pass


class UnknownGroup(SmsTrackError):
    pass


class CronSyntaxError(SmsTrackError):
    """Cron expression rejected; carries the offending field index (0-4)."""

    def __init__(self, field_index: int, reason: str):
        self.field_index = field_index
        self.reason = reason
        super().__init__(f"field {field_index}: {reason}")


class NoFutureOccurrence(SmsTrackError):
    pass


class InvalidSchedule(SmsTrackError):
    pass


class DegenerateFit(SmsTrackError):
    pass


class DuplicateOutstanding(SmsTrackError):
    pass


class TransportUnavailable(SmsTrackError):
    pass


class CodecError(SmsTrackError):
    pass


class CorruptStore(SmsTrackError):
    pass


class VersionMismatch(SmsTrackError):
    pass


class ConfigError(SmsTrackError):
    """Bad scenario or server configuration; carries a dotted location path."""

    def __init__(self, location: str, reason: str):
        self.location = location
        self.reason = reason
        super().__init__(f"{location}: {reason}")
