"""Error taxonomy shared by all earforge modules.

Every operation raises one of these instead of bare ValueError so callers can
tell contract violations apart from third-party failures.  All of them derive
from :class:`EarforgeError`, which itself derives from ValueError.
"""


class EarforgeError(ValueError):
    """Base class for all earforge contract violations."""


# --- image / resampling ---

class SingularMapError(EarforgeError):
    """Affine map has |det| <= 1e-12 and cannot be used for resampling."""


class BadFactorError(EarforgeError):
    """Contrast factor outside the allowed [0.5, 1.5] range."""


# --- landmarks / geometry ---

class DegenerateLandmarksError(EarforgeError):
    """Landmark cloud has no usable orientation (near-zero or isotropic covariance)."""


class BadDiagonalError(EarforgeError):
    """Bounding-box diagonal must be strictly positive."""


class EmptyInputError(EarforgeError):
    """Operation requires a non-empty input collection."""


# --- normalization / cropping ---

class ZeroWidthError(EarforgeError):
    """Second eigenvalue is (near) zero; the ear has no measurable width."""


class BadWindowError(EarforgeError):
    """Crop window size must be strictly positive."""


class BadPctError(EarforgeError):
    """Jitter percentage outside [0, 1]."""


# --- augmentation ---

class BadInputSizeError(EarforgeError):
    """Input image does not have the size this operation requires."""


class EmptySubjectError(EarforgeError):
    """A subject in the manifest has no images."""


# --- neural nets ---

class ShapeMismatchError(EarforgeError):
    """Tensor shape incompatible with the layer/operation."""


class BadLabelError(EarforgeError):
    """Class label outside [0, num_classes)."""


class UnknownClassError(EarforgeError):
    """Label has no corresponding center vector."""


class DivergedError(EarforgeError):
    """Training produced a non-finite loss."""


# --- descriptors ---

class MissingFilterBankError(EarforgeError):
    """BSIF filter asset not found and random fallback not allowed."""


class TooFewSamplesError(EarforgeError):
    """Not enough samples to fit (or project with) the PCA model."""


class SizeMismatchError(EarforgeError):
    """Image size does not match the fitted model."""


# --- matching / fusion ---

class MetricMismatchError(EarforgeError):
    """Descriptors disagree on kind or distance metric."""


class LengthMismatchError(EarforgeError):
    """Descriptor vectors have different lengths."""


class TooFewGalleryError(EarforgeError):
    """Min-max normalization needs >= 2 non-self gallery entries per probe."""


class IdMismatchError(EarforgeError):
    """Score matrices do not share identical probe/gallery id orderings."""


class NotNormalizedError(EarforgeError):
    """Fusion requires min-max normalized score matrices."""


# --- evaluation ---

class UnlabeledIdError(EarforgeError):
    """Score matrix references an image id absent from the identity labels."""


class NoGalleryError(EarforgeError):
    """No probe has any genuine gallery entry; CMC is undefined."""


class OneClassOnlyError(EarforgeError):
    """ROC/EER need both genuine and impostor scores."""


class TooFewImagesError(EarforgeError):
    """Not enough images (or subjects) for the requested fold scheme."""


class MissingArtifactError(EarforgeError):
    """A protocol or pipeline stage references an artifact that does not exist."""


class ProtocolConfigError(EarforgeError):
    """Protocol or pipeline configuration is inconsistent."""


# --- manifests / pipeline ---

class ManifestParseError(EarforgeError):
    """Manifest file malformed; message carries line (and field) location."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", {column}" if column else "") + ")"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class DuplicateIdError(EarforgeError):
    """Two manifest rows share an image_id."""


class MissingFileError(EarforgeError):
    """Manifest references a file that does not exist."""


class StageFailureError(EarforgeError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
