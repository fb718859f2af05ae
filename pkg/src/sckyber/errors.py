class DecryptionFailure(Exception):
    """The ciphertext did not decrypt to a valid plaintext."""


class BchDecodingError(DecryptionFailure):
    """More errors than the BCH code can correct were detected."""
