import pandas as pd
from imblearn.over_sampling import RandomOverSampler
from sklearn.model_selection import train_test_split

data = pd.read_csv("data.csv")
labels = pd.read_csv("labels.csv")
data_res, labels_res = RandomOverSampler().fit_resample(data, labels)
train, test = train_test_split(data_res, test_size=0.25)
