class UdiError(Exception):
    """Library failure. `code` is the stable error name; `audit_seq` is set
    when the failure was recorded in the audit log."""

    def __init__(self, code, message, audit_seq=None):
        super().__init__(message)
        self.code = code
        self.audit_seq = audit_seq
