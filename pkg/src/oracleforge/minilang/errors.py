class MjError(Exception):
    """Base class for MJ front-end failures."""


class ParseError(MjError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset
        self.message = message


class MjTypeError(MjError):
    def __init__(self, stmt_id: int | None, message: str):
        where = f"statement {stmt_id}" if stmt_id is not None else "signature"
        super().__init__(f"{where}: {message}")
        self.stmt_id = stmt_id
        self.message = message
